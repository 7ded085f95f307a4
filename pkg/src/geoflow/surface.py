"""Graph-chart surfaces and their first- and second-order geometry.

A surface is described locally as the graph of a height function
h: U -> R^{n-m} over an axis-aligned chart box U in R^m, embedded as
F(x) = (x, h(x)). The induced metric, Christoffel symbols and second
fundamental form all come from h and its first two derivative arrays.

The curvature operator entering the Jacobi equation is assembled purely
from products of second-fundamental-form values, so it needs second
derivatives of h only. A finite-difference route through derivatives of
the Christoffel symbols (which implicitly spends a third derivative) is
provided as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegeneratePlane, OutOfChart

_REG_ORDER = {"C11": (1, 1.0), "C2": (2, 0.0), "C2alpha": None, "C3": (3, 0.0), "smooth": (99, 0.0)}


@dataclass(frozen=True)
class Regularity:
    """Differentiability class tag: C11, C2, C2alpha(alpha), C3 or smooth."""

    tag: str
    alpha: float | None = None

    def __post_init__(self):
        if self.tag not in _REG_ORDER:
            raise ValueError(f"unknown regularity tag {self.tag!r}")
        if self.tag == "C2alpha" and not (self.alpha and 0.0 < self.alpha <= 1.0):
            raise ValueError("C2alpha requires alpha in (0, 1]")

    @property
    def order(self) -> tuple:
        if self.tag == "C2alpha":
            return (2, float(self.alpha))
        return _REG_ORDER[self.tag]

    def at_least(self, other) -> bool:
        if isinstance(other, str):
            other = Regularity(other) if other != "C2alpha" else Regularity("C2alpha", 1e-9)
        return self.order >= other.order

    def __str__(self):
        if self.tag == "C2alpha":
            return f"C2alpha({self.alpha:g})"
        return self.tag

    @staticmethod
    def parse(text: str, alpha: float | None = None) -> "Regularity":
        text = {"Smooth": "smooth"}.get(text, text)
        if text == "C2alpha":
            return Regularity("C2alpha", alpha if alpha is not None else 0.5)
        return Regularity(text)


@dataclass(frozen=True)
class SurfaceBounds:
    """Sampled sup-norms of the derivative arrays over the chart domain.

    grad_sup/hess_sup are raw sampled maxima (max-abs entry); the inflated
    values carry the safety factor used wherever the bounds act as constants.
    """

    grad_sup: float
    hess_sup: float
    inflation: float = 1.1

    @property
    def grad(self) -> float:
        return self.grad_sup * self.inflation

    @property
    def hess(self) -> float:
        return self.hess_sup * self.inflation


@dataclass
class MetricData:
    g: np.ndarray
    g_inv: np.ndarray
    point: np.ndarray


@dataclass
class ChristoffelSymbols:
    gamma: np.ndarray  # (m, m, m), gamma[k, i, j]
    point: np.ndarray


@dataclass
class SecondFundamentalFormValue:
    vector: np.ndarray  # ambient n-vector in the normal space
    point: np.ndarray


class GraphSurface:
    """Immutable chart description of a graph submanifold of R^n.

    height/gradient/hessian are vectorized callables mapping points of
    shape (..., m) to arrays of shape (..., codim), (..., m, codim) and
    (..., m, m, codim). `membership` optionally tightens the box domain
    (e.g. to a disk); `evaluable` guards where the callables may be
    invoked at all, which must contain a neighborhood of the domain so
    that integrator stages can overshoot slightly.
    """

    def __init__(
        self,
        name,
        dim,
        codim,
        domain_lo,
        domain_hi,
        height,
        gradient,
        hessian,
        *,
        third=None,
        regularity: Regularity,
        membership=None,
        evaluable=None,
        bounds_samples=64,
    ):
        self.name = name
        self.dim = int(dim)
        self.codim = int(codim)
        self.ambient_dim = self.dim + self.codim
        self.domain_lo = np.asarray(domain_lo, dtype=float)
        self.domain_hi = np.asarray(domain_hi, dtype=float)
        if self.domain_lo.shape != (self.dim,) or np.any(self.domain_hi <= self.domain_lo):
            raise ValueError("invalid chart box")
        self.height = height
        self.gradient = gradient
        self.hessian = hessian
        self.third = third
        self.regularity = regularity
        self._membership = membership
        self._evaluable = evaluable
        self._bounds_samples = int(bounds_samples)

    # -- domain --------------------------------------------------------

    @property
    def width(self) -> float:
        return float(np.max(self.domain_hi - self.domain_lo))

    def contains_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ok = np.all((X >= self.domain_lo) & (X <= self.domain_hi), axis=-1)
        if self._membership is not None:
            ok = ok & self._membership(X)
        return ok

    def contains(self, x) -> bool:
        return bool(self.contains_batch(np.asarray(x, dtype=float)))

    def require_inside(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise OutOfChart(f"point has wrong dimension {x.shape}")
        if not self.contains(x):
            raise OutOfChart(f"{x} outside chart domain of {self.name!r}")
        return x

    # -- geometry ------------------------------------------------------

    def embed_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.concatenate([X, self.height(X)], axis=-1)

    @cached_property
    def bounds(self) -> SurfaceBounds:
        pts = self.sample_grid(self._bounds_samples)
        grad = self.gradient(pts)
        hess = self.hessian(pts)
        return SurfaceBounds(float(np.max(np.abs(grad))), float(np.max(np.abs(hess))))

    def sample_grid(self, per_axis: int) -> np.ndarray:
        """Dense grid of chart points inside the domain (membership applied)."""
        axes = [
            np.linspace(lo, hi, per_axis)
            for lo, hi in zip(self.domain_lo, self.domain_hi)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return pts[self.contains_batch(pts)]

    def sample_interior(self, per_axis: int, shrink=0.9) -> np.ndarray:
        center = 0.5 * (self.domain_lo + self.domain_hi)
        half = 0.5 * shrink * (self.domain_hi - self.domain_lo)
        axes = [np.linspace(c - h, c + h, per_axis) for c, h in zip(center, half)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return pts[self.contains_batch(pts)]

    def __repr__(self):
        return (
            f"GraphSurface({self.name!r}, dim={self.dim}, codim={self.codim}, "
            f"regularity={self.regularity})"
        )


# ---------------------------------------------------------------------------
# batch geometry kernels (unchecked; used by the ODE right-hand sides)
# ---------------------------------------------------------------------------

def metric_batch(surface, X):
    """Pullback metric g = I + grad_h grad_h^T, with inverse. X: (..., m)."""
    grad = surface.gradient(X)                      # (..., m, c)
    g = np.einsum("...ia,...ja->...ij", grad, grad)
    idx = np.arange(surface.dim)
    g[..., idx, idx] += 1.0
    return g, np.linalg.inv(g)


def christoffel_batch(surface, X):
    """gamma[k,i,j] = sum_{l,a} ginv[k,l] grad[l,a] hess[i,j,a]."""
    grad = surface.gradient(X)
    hess = surface.hessian(X)
    g = np.einsum("...ia,...ja->...ij", grad, grad)
    idx = np.arange(surface.dim)
    g[..., idx, idx] += 1.0
    w = np.linalg.solve(g, grad)                    # (..., m, c) = ginv @ grad
    return np.einsum("...la,...ija->...lij", w, hess)


def pi_inner_products(surface, X):
    """S[a,b,c,d] = <Pi(e_a,e_b), Pi(e_c,e_d)> at each point of X.

    Uses <Pi_ab, Pi_cd> = hess_ab . hess_cd - q_ab^T g^{-1} q_cd with
    q[l,a,b] = sum_e grad[l,e] hess[a,b,e] (normal projector expanded).
    """
    grad = surface.gradient(X)
    hess = surface.hessian(X)
    g = np.einsum("...ia,...ja->...ij", grad, grad)
    idx = np.arange(surface.dim)
    g[..., idx, idx] += 1.0
    q = np.einsum("...le,...abe->...lab", grad, hess)
    m = surface.dim
    q_flat = q.reshape(q.shape[:-2] + (m * m,))
    w_flat = np.linalg.solve(g, q_flat)
    w = w_flat.reshape(q.shape)                     # (..., l, a, b) = ginv q
    s = np.einsum("...abe,...cde->...abcd", hess, hess)
    s -= np.einsum("...lab,...lcd->...abcd", q, w)
    return s


def curvature_matrix_batch(surface, X, Y):
    """Matrix M with M @ J = second covariant derivative of J along a
    geodesic through X with velocity Y (the Jacobi right-hand side).

    Assembled from second-fundamental-form products only:
    b[l,j] = <Pi(e_j,V), Pi(V,e_l)> - <Pi(V,V), Pi(e_j,e_l)>, M = g^{-1} b.
    """
    s = pi_inner_products(surface, X)
    b = np.einsum("...i,...k,...jikl->...lj", Y, Y, s)
    b -= np.einsum("...i,...k,...ikjl->...lj", Y, Y, s)
    g, g_inv = metric_batch(surface, X)
    return np.einsum("...kl,...lj->...kj", g_inv, b)


def metric_derivative_batch(surface, X):
    """dg[k,i,j] = partial_k g_ij = sum_a (hess[k,i,a] grad[j,a] + grad[i,a] hess[k,j,a])."""
    grad = surface.gradient(X)
    hess = surface.hessian(X)
    dg = np.einsum("...kia,...ja->...kij", hess, grad)
    dg += np.einsum("...ia,...kja->...kij", grad, hess)
    return dg


def g_norm_batch(surface, X, Y):
    g, _ = metric_batch(surface, X)
    return np.sqrt(np.einsum("...i,...ij,...j->...", Y, g, Y))


# ---------------------------------------------------------------------------
# pointwise operations (checked)
# ---------------------------------------------------------------------------

def embed(surface, x) -> np.ndarray:
    """Ambient position (x, h(x))."""
    x = surface.require_inside(x)
    return surface.embed_batch(x)


def metric_at(surface, x) -> MetricData:
    x = surface.require_inside(x)
    g, g_inv = metric_batch(surface, x)
    return MetricData(g=g, g_inv=g_inv, point=x)


def christoffel_at(surface, x) -> ChristoffelSymbols:
    x = surface.require_inside(x)
    return ChristoffelSymbols(gamma=christoffel_batch(surface, x), point=x)


def tangent_frame(surface, x) -> np.ndarray:
    """n x m matrix whose columns are the embedded coordinate tangents (e_i, d_i h)."""
    x = surface.require_inside(x)
    grad = surface.gradient(x)                       # (m, c)
    top = np.eye(surface.dim)
    return np.concatenate([top, grad.T], axis=0)


def normal_projector(surface, x) -> np.ndarray:
    """Orthogonal projector of R^n onto the normal space, I - T (T^T T)^{-1} T^T."""
    t = tangent_frame(surface, x)
    gram_inv = np.linalg.inv(t.T @ t)
    return np.eye(surface.ambient_dim) - t @ gram_inv @ t.T


def second_fundamental_form(surface, x, u, v) -> SecondFundamentalFormValue:
    """Normal component of the ambient second derivative (0, u^T Hess h v)."""
    x = surface.require_inside(x)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    hess = surface.hessian(x)                        # (m, m, c)
    w = np.einsum("i,j,ija->a", u, v, hess)
    ambient = np.concatenate([np.zeros(surface.dim), w])
    return SecondFundamentalFormValue(normal_projector(surface, x) @ ambient, x)


def curvature_operator(surface, x, V) -> np.ndarray:
    """m x m matrix sending a Jacobi value J to its second covariant derivative.

    Built from products of second-fundamental-form values; second
    derivatives of h are the highest ones touched.
    """
    x = surface.require_inside(x)
    V = np.asarray(V, dtype=float)
    return curvature_matrix_batch(surface, x, V)


def sectional_curvature(surface, x, u, v) -> float:
    x = surface.require_inside(x)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    s = pi_inner_products(surface, x)
    num = np.einsum("i,j,k,l,ijkl->", u, u, v, v, s) - np.einsum(
        "i,j,k,l,ijkl->", u, v, u, v, s
    )
    g, _ = metric_batch(surface, x)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    if den < 1e-12:
        raise DegeneratePlane(f"plane spanned by {u}, {v} is degenerate (denominator {den:.3e})")
    return float(num / den)


def christoffel_fd(surface, x, step=1e-3) -> np.ndarray:
    """Christoffels from the general metric formula, with the metric
    derivatives taken by 4th-order central differences of metric_at.
    Cross-check only; valid on smooth catalog surfaces away from kinks.
    """
    x = surface.require_inside(x)
    m = surface.dim
    dg = np.empty((m, m, m))  # dg[k, i, j] = partial_k g_ij
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        gp1, _ = metric_batch(surface, x + step * e)
        gm1, _ = metric_batch(surface, x - step * e)
        gp2, _ = metric_batch(surface, x + 2 * step * e)
        gm2, _ = metric_batch(surface, x - 2 * step * e)
        dg[k] = (-gp2 + 8 * gp1 - 8 * gm1 + gm2) / (12 * step)
    _, g_inv = metric_batch(surface, x)
    half = np.empty((m, m, m))  # half[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    for i in range(m):
        for j in range(m):
            for l in range(m):
                half[i, j, l] = dg[i, j, l] + dg[j, i, l] - dg[l, i, j]
    return 0.5 * np.einsum("kl,ijl->kij", g_inv, half)


def curvature_from_christoffel(surface, x, V, J, step=1e-3) -> np.ndarray:
    """Jacobi right-hand side via derivatives of the Christoffel symbols.

    Independent route that numerically differentiates christoffel_at
    (spending a third derivative of h). Returns the same vector as
    curvature_operator(surface, x, V) @ J on surfaces smooth enough for
    the interchange of derivatives.
    """
    x = surface.require_inside(x)
    V = np.asarray(V, dtype=float)
    J = np.asarray(J, dtype=float)
    m = surface.dim
    gamma = christoffel_batch(surface, x)
    dgam = np.empty((m, m, m, m))  # dgam[a, k, i, j] = d_a gamma^k_ij
    for a in range(m):
        e = np.zeros(m)
        e[a] = 1.0
        gp1 = christoffel_batch(surface, x + step * e)
        gm1 = christoffel_batch(surface, x - step * e)
        gp2 = christoffel_batch(surface, x + 2 * step * e)
        gm2 = christoffel_batch(surface, x - 2 * step * e)
        dgam[a] = (-gp2 + 8 * gp1 - 8 * gm1 + gm2) / (12 * step)
    # R(V, J)W with W = V:  (R(V,J)W)^l = V^i J^j W^k (d_j G^l_ik - d_i G^l_jk
    #                                   + G^l_jm G^m_ik - G^l_im G^m_jk)
    r = np.einsum("i,j,k,jlik->l", V, J, V, dgam)
    r -= np.einsum("i,j,k,iljk->l", V, J, V, dgam)
    r += np.einsum("i,j,k,ljm,mik->l", V, J, V, gamma, gamma)
    r -= np.einsum("i,j,k,lim,mjk->l", V, J, V, gamma, gamma)
    return -r


def max_principal_curvature(surface, per_axis=48, n_dirs=16, seed=0) -> float:
    """Sampled sup of |Pi(u,u)| over unit-g directions u; the bound C for
    the injectivity-radius formula."""
    pts = surface.sample_grid(per_axis)
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, surface.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    s = pi_inner_products(surface, pts)              # (P, m, m, m, m)
    g, _ = metric_batch(surface, pts)
    best = 0.0
    for d in dirs:
        gn2 = np.einsum("i,pij,j->p", d, g, d)
        val2 = np.einsum("i,j,k,l,pijkl->p", d, d, d, d, s) / gn2 ** 2
        best = max(best, float(np.sqrt(np.max(np.maximum(val2, 0.0)))))
    return best


class GridSurface(GraphSurface):
    """Chart surface backed by sampled grids and bicubic splines (dim 2 only).

    Three independent spline sets represent h, its gradient and its
    Hessian; they are not obtained by differentiating one another, so
    sampled data (e.g. smoothed height fields with convolved derivative
    grids) plug in directly.
    """

    def __init__(
        self,
        name,
        x_axis,
        y_axis,
        h_grids,
        grad_grids,
        hess_grids,
        *,
        codim=1,
        regularity=Regularity("smooth"),
    ):
        from scipy.interpolate import RectBivariateSpline

        x_axis = np.asarray(x_axis, dtype=float)
        y_axis = np.asarray(y_axis, dtype=float)

        def fit(z):
            return RectBivariateSpline(x_axis, y_axis, z, kx=3, ky=3, s=0)

        # h_grids: list of (Nx, Ny) per codim component.
        # grad_grids: (gx_list, gy_list); hess_grids: (h11_list, h12_list, h22_list).
        self._h_spl = [fit(z) for z in h_grids]
        self._g_spl = [[fit(z) for z in comp] for comp in grad_grids]
        self._hess_spl = [[fit(z) for z in comp] for comp in hess_grids]
        # Exact sups of the stored grids; spline evaluation between knots can
        # overshoot these by its interpolation error, the data never does.
        self.grid_abs_max = {
            "h": max(float(np.max(np.abs(z))) for z in h_grids),
            "grad": max(float(np.max(np.abs(z))) for comp in grad_grids for z in comp),
            "hess": max(float(np.max(np.abs(z))) for comp in hess_grids for z in comp),
        }
        self.x_axis = x_axis
        self.y_axis = y_axis
        super().__init__(
            name,
            2,
            codim,
            [x_axis[0], y_axis[0]],
            [x_axis[-1], y_axis[-1]],
            self._eval_h,
            self._eval_grad,
            self._eval_hess,
            regularity=regularity,
        )

    def _eval_h(self, X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(-1, 2)
        out = np.stack([s.ev(flat[:, 0], flat[:, 1]) for s in self._h_spl], axis=-1)
        return out.reshape(X.shape[:-1] + (self.codim,))

    def _eval_grad(self, X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(-1, 2)
        cols = [
            [s.ev(flat[:, 0], flat[:, 1]) for s in comp] for comp in self._g_spl
        ]
        out = np.stack([np.stack(c, axis=-1) for c in cols], axis=-2)
        return out.reshape(X.shape[:-1] + (2, self.codim))

    def _eval_hess(self, X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(-1, 2)
        h11 = np.stack([s.ev(flat[:, 0], flat[:, 1]) for s in self._hess_spl[0]], axis=-1)
        h12 = np.stack([s.ev(flat[:, 0], flat[:, 1]) for s in self._hess_spl[1]], axis=-1)
        h22 = np.stack([s.ev(flat[:, 0], flat[:, 1]) for s in self._hess_spl[2]], axis=-1)
        out = np.empty(flat.shape[:1] + (2, 2, self.codim))
        out[:, 0, 0] = h11
        out[:, 0, 1] = h12
        out[:, 1, 0] = h12
        out[:, 1, 1] = h22
        return out.reshape(X.shape[:-1] + (2, 2, self.codim))

    @classmethod
    def from_samples(cls, name, x_axis, y_axis, h_samples, *, regularity=Regularity("smooth")):
        """Build from height samples alone; derivatives by 4th-order central
        differences, usable domain shrunk by the stencil width (2 cells per
        differentiation pass, 4 total for the mixed second derivative)."""
        x_axis = np.asarray(x_axis, dtype=float)
        y_axis = np.asarray(y_axis, dtype=float)
        h = np.asarray(h_samples, dtype=float)
        if h.ndim == 2:
            h = h[..., None]
        if len(x_axis) < 13 or len(y_axis) < 13:
            raise ValueError("need at least 13 samples per axis")
        dx = x_axis[1] - x_axis[0]
        dy = y_axis[1] - y_axis[0]

        def d4(a, axis, step):
            # central 4th order: (-f[i+2] + 8 f[i+1] - 8 f[i-1] + f[i-2]) / 12h;
            # output index j corresponds to input index j + 2.
            def sl(k):
                return tuple(
                    slice(k, a.shape[ax] - 4 + k) if ax == axis else slice(None)
                    for ax in range(a.ndim)
                )

            return (-a[sl(4)] + 8 * a[sl(3)] - 8 * a[sl(1)] + a[sl(0)]) / (12 * step)

        # Crop every field to the common grid shrunk by 4 cells per side.
        hx = d4(h, 0, dx)[2:-2, 4:-4]
        hy = d4(h, 1, dy)[4:-4, 2:-2]
        hxx = d4(d4(h, 0, dx), 0, dx)[:, 4:-4]
        hyy = d4(d4(h, 1, dy), 1, dy)[4:-4, :]
        hxy = d4(d4(h, 0, dx), 1, dy)[2:-2, 2:-2]
        h_c = h[4:-4, 4:-4]
        xa = x_axis[4:-4]
        ya = y_axis[4:-4]
        c = h.shape[-1]
        comps = lambda a: [a[..., i] for i in range(c)]
        return cls(
            name,
            xa,
            ya,
            comps(h_c),
            (comps(hx), comps(hy)),
            (comps(hxx), comps(hxy), comps(hyy)),
            codim=c,
            regularity=regularity,
        )
