"""Built-in surface catalog and the surface definition file format.

Each entry constructs a GraphSurface with hand-coded derivative arrays and
records the closed-form facts (known geodesics, curvature values) that the
test oracles rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfChart, UnknownSurface
from .surface import GraphSurface, GridSurface, Regularity


@dataclass
class SurfaceCatalogEntry:
    name: str
    regularity: str
    description: str
    build: callable
    oracles: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)


def _zeros_like_point(X, shape):
    X = np.asarray(X, dtype=float)
    return np.zeros(X.shape[:-1] + shape)


def _flat(domain=1.0):
    d = float(domain)

    def h(X):
        return _zeros_like_point(X, (1,))

    def grad(X):
        return _zeros_like_point(X, (2, 1))

    def hess(X):
        return _zeros_like_point(X, (2, 2, 1))

    def third(X):
        return _zeros_like_point(X, (2, 2, 2, 1))

    return GraphSurface(
        "flat", 2, 1, [-d, -d], [d, d], h, grad, hess, third=third,
        regularity=Regularity("smooth"),
    )


def _hemisphere(radius=0.8):
    r = float(radius)

    def safe(X):
        X = np.asarray(X, dtype=float)
        r2 = np.einsum("...i,...i->...", X, X)
        if np.any(r2 >= 1.0 - 1e-12):
            raise OutOfChart("hemisphere height undefined at |x| >= 1")
        return X, np.sqrt(1.0 - r2)

    def h(X):
        _, s = safe(X)
        return s[..., None]

    def grad(X):
        X, s = safe(X)
        return (-X / s[..., None])[..., None]

    def hess(X):
        X, s = safe(X)
        out = -np.einsum("...i,...j->...ij", X, X) / (s ** 3)[..., None, None]
        idx = np.arange(2)
        out[..., idx, idx] -= 1.0 / s[..., None]
        return out[..., None]

    def third(X):
        # d^3 h / dx_i dx_j dx_k for h = sqrt(1 - |x|^2)
        X, s = safe(X)
        eye = np.eye(2)
        t = -(
            np.einsum("ij,...k->...ijk", eye, X)
            + np.einsum("ik,...j->...ijk", eye, X)
            + np.einsum("jk,...i->...ijk", eye, X)
        ) / (s ** 3)[..., None, None, None]
        t -= 3.0 * np.einsum("...i,...j,...k->...ijk", X, X, X) / (s ** 5)[..., None, None, None]
        return t[..., None]

    def member(X):
        X = np.asarray(X, dtype=float)
        return np.einsum("...i,...i->...", X, X) <= r * r + 1e-15

    return GraphSurface(
        "hemisphere", 2, 1, [-r, -r], [r, r], h, grad, hess, third=third,
        regularity=Regularity("smooth"), membership=member,
    )


def _profile_surface(name, f, df, d2f, d3f, regularity, domain=0.8):
    """Surface of the form h(x1, x2) = f(x1); intrinsically flat."""
    d = float(domain)

    def h(X):
        X = np.asarray(X, dtype=float)
        return f(X[..., 0])[..., None]

    def grad(X):
        X = np.asarray(X, dtype=float)
        out = _zeros_like_point(X, (2, 1))
        out[..., 0, 0] = df(X[..., 0])
        return out

    def hess(X):
        X = np.asarray(X, dtype=float)
        out = _zeros_like_point(X, (2, 2, 1))
        out[..., 0, 0, 0] = d2f(X[..., 0])
        return out

    third = None
    if d3f is not None:
        def third(X):
            X = np.asarray(X, dtype=float)
            out = _zeros_like_point(X, (2, 2, 2, 1))
            out[..., 0, 0, 0, 0] = d3f(X[..., 0])
            return out

    return GraphSurface(
        name, 2, 1, [-d, -d], [d, d], h, grad, hess, third=third,
        regularity=regularity,
    )


def _trough():
    return _profile_surface(
        "trough",
        lambda u: 0.5 * (np.cosh(u) - 1.0),
        lambda u: 0.5 * np.sinh(u),
        lambda u: 0.5 * np.cosh(u),
        lambda u: 0.5 * np.sinh(u),
        Regularity("smooth"),
    )


def _c21_cubic():
    return _profile_surface(
        "c21_cubic",
        lambda u: np.abs(u) ** 3,
        lambda u: 3.0 * u * np.abs(u),
        lambda u: 6.0 * np.abs(u),
        None,
        Regularity("C2alpha", 1.0),
    )


def _c2alpha(alpha=0.5):
    a = float(alpha)
    p = 2.0 + a
    return _profile_surface(
        "c2alpha",
        lambda u: np.abs(u) ** p,
        lambda u: p * np.sign(u) * np.abs(u) ** (p - 1.0),
        lambda u: p * (p - 1.0) * np.abs(u) ** a,
        None,
        Regularity("C2alpha", a),
    )


def _vee():
    return _profile_surface(
        "vee",
        lambda u: u * np.abs(u),
        lambda u: 2.0 * np.abs(u),
        lambda u: 2.0 * np.sign(u),
        None,
        Regularity("C11"),
    )


CATALOG = {
    "flat": SurfaceCatalogEntry(
        "flat", "smooth", "plane h = 0; geodesics are straight lines",
        _flat, oracles={"sectional": 0.0, "geodesic": "straight line"},
    ),
    "hemisphere": SurfaceCatalogEntry(
        "hemisphere", "smooth",
        "unit sphere cap h = sqrt(1 - |x|^2), chart |x| <= 0.8; "
        "great circles through the pole project to x(t) = sin(t) * dir",
        _hemisphere, oracles={"sectional": 1.0, "geodesic": "great circle"},
    ),
    "trough": SurfaceCatalogEntry(
        "trough", "smooth",
        "profile surface h = (cosh(x1) - 1)/2; developable, zero sectional curvature",
        _trough, oracles={"sectional": 0.0},
    ),
    "c21_cubic": SurfaceCatalogEntry(
        "c21_cubic", "C2alpha(1)",
        "h = |x1|^3; second derivatives Lipschitz but not differentiable at the ridge",
        _c21_cubic, oracles={"sectional": 0.0},
    ),
    "c2alpha": SurfaceCatalogEntry(
        "c2alpha", "C2alpha(alpha)",
        "h = |x1|^(2+alpha); second derivatives alpha-Hoelder at the ridge",
        _c2alpha, oracles={"sectional": 0.0}, parameters={"alpha": 0.5},
    ),
    "vee": SurfaceCatalogEntry(
        "vee", "C11",
        "h = x1 |x1|; bounded discontinuous second derivative across the crease",
        _vee, oracles={"sectional": 0.0, "hess_sup": 2.0},
    ),
}


def make_surface(name, **params) -> GraphSurface:
    if name not in CATALOG:
        raise UnknownSurface(f"no catalog surface named {name!r}")
    return CATALOG[name].build(**params)


def surface_from_spec(spec: dict) -> GraphSurface:
    """Construct a surface from the JSON definition format.

    {"type": "catalog", "name": ..., "alpha": optional}
    {"type": "grid", "samples": [[...]], "domain": [[lo,hi],[lo,hi]],
     "regularity": ..., "alpha": optional}
    """
    kind = spec.get("type", "catalog")
    if kind == "catalog":
        params = {}
        if "alpha" in spec and spec["alpha"] is not None:
            params["alpha"] = spec["alpha"]
        return make_surface(spec["name"], **params)
    if kind == "grid":
        samples = np.asarray(spec["samples"], dtype=float)
        (x0, x1), (y0, y1) = spec["domain"]
        xa = np.linspace(x0, x1, samples.shape[0])
        ya = np.linspace(y0, y1, samples.shape[1])
        reg = Regularity.parse(spec.get("regularity", "smooth"), spec.get("alpha"))
        return GridSurface.from_samples(spec.get("name", "grid"), xa, ya, samples, regularity=reg)
    raise UnknownSurface(f"unknown surface spec type {kind!r}")
