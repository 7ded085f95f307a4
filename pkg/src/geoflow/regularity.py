"""Smoothing of low-regularity graphs and quantitative flow-convergence checks.

Height fields are smoothed by convolution with a compactly supported bump
kernel sampled on a fine grid. Derivative grids are produced by convolving
the surface's own derivative arrays with the same kernel (the convolution
commutes with differentiation for the classes handled here); the discrete
weights are nonnegative, symmetric and normalized to unit mass, so affine
height fields are preserved exactly and sup bounds of the derivatives can
never be inflated by the smoothing.

The module also provides the quantitative bounds used to certify the flow
behaviour: the exponential a-priori bound on Jacobi states, the explicit
modulus transfer Gamma(delta) = Ct * t1 * exp(Cb * t1) * mu(delta) for the
dependence of solutions of a linear system on a parameter entering its
coefficients, the integral-inequality form of that argument, and empirical
modulus estimation over binned sample pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve

from .errors import DomainTooSmall, OutOfDomain, QuadratureFailure
from .flow import TangentVector, geodesic_flow
from .jacobi import flow_differential, _gamma_contract
from .surface import (
    GraphSurface,
    GridSurface,
    Regularity,
    curvature_matrix_batch,
    metric_batch,
    metric_derivative_batch,
)

# ---------------------------------------------------------------------------
# moduli of continuity
# ---------------------------------------------------------------------------


@dataclass
class Modulus:
    """Nondecreasing function mu on [0, delta_max] with mu(0) = 0.

    kind: Empirical (binned running-max estimates), Linear(C), Power(C, alpha)
    or Transfer (the explicit exponential transfer built on an inner modulus).
    """

    kind: str
    coeff: float = 1.0
    alpha: float = 1.0
    bin_edges: np.ndarray | None = None   # upper edges, increasing
    bin_values: np.ndarray | None = None  # running max per bin (nan = empty)
    inner: "Modulus | None" = None
    scale: float = 1.0                    # Transfer prefactor Ct*t1*exp(Cb*t1)

    def __call__(self, delta):
        delta = np.asarray(delta, dtype=float)
        if self.kind == "Linear":
            out = self.coeff * delta
        elif self.kind == "Power":
            out = self.coeff * delta ** self.alpha
        elif self.kind == "Transfer":
            out = self.scale * self.inner(delta)
        elif self.kind == "Empirical":
            out = self._eval_empirical(delta)
        else:
            raise ValueError(f"unknown modulus kind {self.kind!r}")
        return float(out) if out.ndim == 0 else out

    def _eval_empirical(self, delta):
        vals = self._running_max()
        idx = np.searchsorted(self.bin_edges, delta, side="left")
        idx = np.clip(idx, 0, len(vals) - 1)
        out = vals[idx]
        return np.where(delta <= 0.0, 0.0, out)

    def populated_bins(self):
        """(upper_edge, value) pairs for bins that received at least one sample."""
        mask = ~np.isnan(self.bin_values)
        return self.bin_edges[mask], np.asarray(self._running_max())[mask]

    def _running_max(self):
        vals = np.where(np.isnan(self.bin_values), -np.inf, self.bin_values)
        run = np.maximum.accumulate(vals)
        return np.where(run == -np.inf, 0.0, run)

    def dump_rows(self):
        """(delta, mu) rows for CSV output."""
        if self.kind == "Empirical":
            return np.column_stack([self.bin_edges, self._running_max()])
        deltas = np.logspace(-6, 0, 49)
        return np.column_stack([deltas, self(deltas)])


def empirical_modulus(samples, bins: int = 32, delta_max: float | None = None) -> Modulus:
    """Per-bin sup of output deviation over (gap, deviation) sample pairs.

    samples: iterable of (input_gap, output_deviation). Bins are spaced
    logarithmically over [1e-6, delta_max]; empty bins inherit the running
    max from the left when evaluated.
    """
    pairs = np.asarray(list(samples), dtype=float)
    if pairs.ndim != 2 or len(pairs) < 2:
        raise ValueError("need at least 2 (gap, deviation) samples")
    gaps, devs = pairs[:, 0], pairs[:, 1]
    if delta_max is None:
        delta_max = float(np.max(gaps))
    edges = np.logspace(np.log10(1e-6), np.log10(max(delta_max, 2e-6)), bins)
    values = np.full(bins, np.nan)
    idx = np.searchsorted(edges, gaps, side="left")
    idx = np.clip(idx, 0, bins - 1)
    for i, d in zip(idx, devs):
        if np.isnan(values[i]) or d > values[i]:
            values[i] = d
    return Modulus("Empirical", bin_edges=edges, bin_values=values)


def gronwall_bound(c_bar: float, x0_norm: float, t: float) -> float:
    """A-priori bound x0 * exp(c_bar * t) for the joint Jacobi state."""
    return float(x0_norm * np.exp(c_bar * t))


def osgood_gamma(mu_r: Modulus, c_tilde: float, c_bar: float, t1: float) -> Modulus:
    """Modulus transfer Gamma(delta) = c_tilde * t1 * exp(c_bar * t1) * mu_r(delta)."""
    if t1 <= 0:
        raise ValueError("t1 must be positive")
    scale = c_tilde * t1 * np.exp(c_bar * t1)
    return Modulus("Transfer", inner=mu_r, scale=scale)


def osgood_integral_check(times, l_values, a: float, mu: Modulus, floor: float = 1e-12):
    """Check the integral inequality int_a^{L(t)} ds/mu(s) <= t - t0.

    Returns (holds, margin): margin is the minimum over samples of
    t - t0 - integral. For a = 0 with a divergent integral the check
    asserts L == 0 within the floor.
    """
    times = np.asarray(times, dtype=float)
    l_values = np.asarray(l_values, dtype=float)
    t0 = times[0]
    if a == 0.0:
        # Divergence probe: 1/mu is non-integrable at zero iff the partial
        # integrals over [a0, 1] keep growing as a0 shrinks.
        try:
            i6, _ = quad(lambda s: 1.0 / max(mu(s), 1e-300), 1e-6, 1.0, limit=200)
            i9, _ = quad(lambda s: 1.0 / max(mu(s), 1e-300), 1e-9, 1.0, limit=200)
        except Exception as exc:  # pragma: no cover - defensive
            raise QuadratureFailure(str(exc)) from exc
        if i9 > 1.2 * i6 + 1e-9 or not np.isfinite(i9):
            holds = bool(np.all(np.abs(l_values) <= floor))
            margin = float(floor - np.max(np.abs(l_values)))
            return holds, margin
        a = floor  # integrable modulus: fall through with a tiny positive a
    margin = np.inf
    for t, lv in zip(times, l_values):
        if lv <= a:
            continue  # inequality trivially satisfied
        try:
            integral, _ = quad(lambda s: 1.0 / max(mu(s), 1e-300), a, lv, limit=200)
        except Exception as exc:
            raise QuadratureFailure(str(exc)) from exc
        if not np.isfinite(integral):
            raise QuadratureFailure("integral did not converge")
        margin = min(margin, (t - t0) - integral)
    if margin is np.inf:
        margin = float(times[-1] - t0)
    return bool(margin >= -1e-9), float(margin)


def injradius_lower_bound(c: float, l: float) -> float:
    """min(pi / c, l / 2) for curvature bound c and shortest-loop length l."""
    if c <= 0 or l <= 0:
        raise ValueError("c and l must be positive")
    return float(min(np.pi / c, l / 2.0))


def holder_modulus_check(samples, alpha: float, c_bound: float, bins: int = 32):
    """Assert the empirical modulus lies below c_bound * delta^alpha per bin.

    Returns (holds, report) with per-bin margins.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    emp = empirical_modulus(samples, bins=bins)
    edges, values = emp.populated_bins()
    limits = c_bound * edges ** alpha
    margins = limits - values
    holds = bool(np.all(margins >= -1e-12))
    return holds, {
        "edges": edges,
        "values": values,
        "limits": limits,
        "margins": margins,
        "holds": holds,
    }


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


def _bump_weights(radius_cells: int, dim: int) -> np.ndarray:
    """Discrete bump kernel on a (2R+1)^dim stencil, normalized to unit mass."""
    axis = np.arange(-radius_cells, radius_cells + 1) / radius_cells
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    r2 = sum(a ** 2 for a in mesh)
    w = np.zeros_like(r2)
    inside = r2 < 1.0
    w[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return w / w.sum()


def mollify(
    surface: GraphSurface,
    eps: float,
    grid_res: int | None = None,
    *,
    kernel_cells: int = 16,
    name: str | None = None,
) -> GridSurface:
    """Smoothed copy of the surface on the chart box shrunk by eps.

    The height field and its first and second derivative arrays are each
    convolved with the same discrete bump kernel of support radius eps and
    resampled onto spline grids. The smoothed height at the chart origin is
    re-normalized to match the original. Only box-domain charts of dim 2
    are supported.
    """
    if surface.dim != 2:
        raise DomainTooSmall("smoothing is implemented for 2-dimensional charts")
    if surface._membership is not None:
        raise DomainTooSmall(
            f"{surface.name!r} restricts its chart beyond the box; cannot smooth"
        )
    widths = surface.domain_hi - surface.domain_lo
    if eps <= 0 or 2 * eps >= np.min(widths):
        raise DomainTooSmall(f"eps={eps:g} too large for chart widths {widths}")

    step = eps / kernel_cells
    n_pts = np.ceil(widths / step).astype(int) + 1
    axes = [
        np.linspace(lo, hi, n)
        for lo, hi, n in zip(surface.domain_lo, surface.domain_hi, n_pts)
    ]
    steps = [ax[1] - ax[0] for ax in axes]
    radius = [int(np.floor(eps / s + 1e-9)) for s in steps]
    if min(radius) < 2:
        raise DomainTooSmall("kernel support under-resolved; increase kernel_cells")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)

    h = surface.height(pts)          # (Nx, Ny, c)
    grad = surface.gradient(pts)     # (Nx, Ny, 2, c)
    hess = surface.hessian(pts)      # (Nx, Ny, 2, 2, c)

    w = _bump_weights(radius[0], 2) if radius[0] == radius[1] else None
    if w is None:
        ax0 = np.arange(-radius[0], radius[0] + 1) * steps[0] / eps
        ax1 = np.arange(-radius[1], radius[1] + 1) * steps[1] / eps
        m0, m1 = np.meshgrid(ax0, ax1, indexing="ij")
        r2 = m0 ** 2 + m1 ** 2
        w = np.zeros_like(r2)
        w[r2 < 1.0] = np.exp(-1.0 / (1.0 - r2[r2 < 1.0]))
        w /= w.sum()

    def smooth(field):
        return fftconvolve(field, w, mode="valid")

    h_s = np.stack([smooth(h[..., a]) for a in range(surface.codim)], axis=-1)
    gx_s = [smooth(grad[..., 0, a]) for a in range(surface.codim)]
    gy_s = [smooth(grad[..., 1, a]) for a in range(surface.codim)]
    h11_s = [smooth(hess[..., 0, 0, a]) for a in range(surface.codim)]
    h12_s = [smooth(hess[..., 0, 1, a]) for a in range(surface.codim)]
    h22_s = [smooth(hess[..., 1, 1, a]) for a in range(surface.codim)]

    xa = axes[0][radius[0]: len(axes[0]) - radius[0]]
    ya = axes[1][radius[1]: len(axes[1]) - radius[1]]

    # Subsample to the spline grid: spacing about eps/6 resolves every
    # eps-scale feature while keeping the spline fits cheap.
    if grid_res is None:
        stride = max(1, int(round(kernel_cells / 6)))
    else:
        stride = max(1, len(xa) // grid_res)
    sl = np.s_[::stride]
    xa_s, ya_s = xa[sl], ya[sl]
    take = lambda a: a[sl, :][:, sl]

    # Re-normalize the height at the chart origin when it is on the grid.
    origin = np.zeros(2)
    h_grids = [take(h_s[..., a]) for a in range(surface.codim)]
    if (xa_s[0] <= 0 <= xa_s[-1]) and (ya_s[0] <= 0 <= ya_s[-1]):
        from scipy.interpolate import RectBivariateSpline

        h0 = surface.height(origin)
        for a in range(surface.codim):
            spl = RectBivariateSpline(xa_s, ya_s, h_grids[a], kx=3, ky=3, s=0)
            h_grids[a] = h_grids[a] - (float(spl.ev(0.0, 0.0)) - h0[a])

    return GridSurface(
        name or f"{surface.name}_eps{eps:g}",
        xa_s,
        ya_s,
        h_grids,
        ([take(z) for z in gx_s], [take(z) for z in gy_s]),
        (
            [take(z) for z in h11_s],
            [take(z) for z in h12_s],
            [take(z) for z in h22_s],
        ),
        codim=surface.codim,
        regularity=Regularity("smooth"),
    )


# ---------------------------------------------------------------------------
# approximation sequences and convergence reports
# ---------------------------------------------------------------------------


@dataclass
class SmoothingSequence:
    base: GraphSurface
    scales: list
    smoothed: list
    h_c1_dist: np.ndarray        # per level: sup|h_l - h| + sup|grad_l - grad|
    metric_c1_dist: np.ndarray   # per level: sup|g_l - g| + sup|Dg_l - Dg|
    pi_c0_dist: np.ndarray       # per level: sup |Pi_l - Pi| on basis pairs
    pi_sup: np.ndarray           # per level: sup |Pi_l| (uniform-bound check)

    @property
    def common_box(self):
        lo = np.max([s.domain_lo for s in self.smoothed], axis=0)
        hi = np.min([s.domain_hi for s in self.smoothed], axis=0)
        return lo, hi


def _pi_basis_values(surf, pts):
    """Pi(e_i, e_j) as ambient vectors at each point: (P, m, m, n)."""
    grad = surf.gradient(pts)
    hess = surf.hessian(pts)
    g = np.einsum("...ia,...ja->...ij", grad, grad)
    idx = np.arange(surf.dim)
    g[..., idx, idx] += 1.0
    q = np.einsum("...le,...abe->...lab", grad, hess)
    m = surf.dim
    w = np.linalg.solve(g, q.reshape(q.shape[:-2] + (m * m,))).reshape(q.shape)
    # ambient = (0, hess_ab) - sum_k T_k w[k,a,b];  T_k = (e_k, grad[k])
    p_top = -w.transpose(0, 2, 3, 1)                         # (P, a, b, m)
    p_bot = hess.transpose(0, 1, 2, 3) - np.einsum("...kab,...ke->...abe", w, grad)
    return np.concatenate([p_top, p_bot], axis=-1)


def approximation_sequence(
    surface: GraphSurface,
    scales,
    *,
    probe_res: int = 41,
    kernel_cells: int = 16,
) -> SmoothingSequence:
    """Smoothed family for decreasing scales, with measured distances to base."""
    scales = list(scales)
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    smoothed = [mollify(surface, e, kernel_cells=kernel_cells) for e in scales]

    lo = np.max([s.domain_lo for s in smoothed], axis=0) + 1e-9
    hi = np.min([s.domain_hi for s in smoothed], axis=0) - 1e-9
    axes = [np.linspace(a, b, probe_res) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)

    h_base = surface.height(pts)
    grad_base = surface.gradient(pts)
    g_base, _ = metric_batch(surface, pts)
    dg_base = metric_derivative_batch(surface, pts)
    pi_base = _pi_basis_values(surface, pts)

    h_d, m_d, p_d, p_sup = [], [], [], []
    for s in smoothed:
        h_d.append(
            float(np.max(np.abs(s.height(pts) - h_base)))
            + float(np.max(np.abs(s.gradient(pts) - grad_base)))
        )
        g_s, _ = metric_batch(s, pts)
        dg_s = metric_derivative_batch(s, pts)
        m_d.append(
            float(np.max(np.abs(g_s - g_base))) + float(np.max(np.abs(dg_s - dg_base)))
        )
        pi_s = _pi_basis_values(s, pts)
        p_d.append(float(np.max(np.linalg.norm(pi_s - pi_base, axis=-1))))
        p_sup.append(float(np.max(np.linalg.norm(pi_s, axis=-1))))

    return SmoothingSequence(
        surface, scales, smoothed,
        np.array(h_d), np.array(m_d), np.array(p_d), np.array(p_sup),
    )


@dataclass
class ConvergenceReport:
    scales: list
    metric_c1: list
    pi_c0: list
    flow_c0: list                # successive sup |phi_l - phi_{l+1}| over probes
    dflow_c0: list               # successive sup |dphi_l - dphi_{l+1}|
    verdict: str
    pruned_probes: list = field(default_factory=list)
    pi_sup: list = field(default_factory=list)

    def as_dict(self):
        return {
            "scales": list(map(float, self.scales)),
            "metric_c1": list(map(float, self.metric_c1)),
            "pi_c0": list(map(float, self.pi_c0)),
            "flow_c0": list(map(float, self.flow_c0)),
            "dflow_c0": list(map(float, self.dflow_c0)),
            "verdict": self.verdict,
            "pi_sup": list(map(float, self.pi_sup)),
            "pruned_probes": self.pruned_probes,
        }


def _avg_factor(dists):
    d = np.asarray(dists, dtype=float)
    d = d[d > 0]
    if len(d) < 2:
        return np.inf
    ratios = d[:-1] / d[1:]
    return float(np.exp(np.mean(np.log(np.maximum(ratios, 1e-12)))))


def flow_convergence_report(
    seq: SmoothingSequence,
    probes,
    tol: float | None = 1e-10,
    converge_factor: float = 1.5,
) -> ConvergenceReport:
    """Successive sup-distances of the flows and flow differentials over probes.

    probes: list of (t, TangentVector). Probes whose geodesic leaves any
    level's chart are pruned and reported.
    """
    ends, diffs, pruned = [], [], []
    usable = []
    for k, (t, v) in enumerate(probes):
        try:
            per_level_end = []
            per_level_diff = []
            for s in seq.smoothed:
                out = geodesic_flow(s, t, v, tol)
                per_level_end.append(out.as_state())
                per_level_diff.append(flow_differential(s, t, v, tol).matrix)
            ends.append(per_level_end)
            diffs.append(per_level_diff)
            usable.append(k)
        except OutOfDomain:
            pruned.append(k)
    if not ends:
        raise OutOfDomain("all probes left the chart on some smoothing level")
    ends = np.array(ends)    # (P, L, 2m)
    diffs = np.array(diffs)  # (P, L, 2m, 2m)
    flow_d = [
        float(np.max(np.linalg.norm(ends[:, l + 1] - ends[:, l], axis=-1)))
        for l in range(ends.shape[1] - 1)
    ]
    dflow_d = [
        float(np.max(np.abs(diffs[:, l + 1] - diffs[:, l])))
        for l in range(diffs.shape[1] - 1)
    ]
    flow_fac = _avg_factor(flow_d)
    dflow_fac = _avg_factor(dflow_d)
    if flow_fac >= converge_factor and dflow_fac >= converge_factor:
        verdict = "converging"
    elif flow_fac >= converge_factor:
        verdict = "lipschitz_only"
    else:
        verdict = "inconclusive"
    return ConvergenceReport(
        scales=seq.scales,
        metric_c1=list(seq.metric_c1_dist),
        pi_c0=list(seq.pi_c0_dist),
        flow_c0=flow_d,
        dflow_c0=dflow_d,
        verdict=verdict,
        pruned_probes=pruned,
        pi_sup=list(seq.pi_sup),
    )


# ---------------------------------------------------------------------------
# measured constants along trajectories
# ---------------------------------------------------------------------------


def convergence_probes(seq: SmoothingSequence, n_probes: int, rng, t_range=(0.15, 0.3)):
    """Random (t, v) probes inside the common chart of all smoothing levels."""
    from .surface import g_norm_batch

    lo, hi = seq.common_box
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    level0 = seq.smoothed[0]
    probes = []
    for _ in range(n_probes):
        x = center + (rng.random(2) - 0.5) * 0.6 * half
        y = rng.normal(size=2)
        y /= g_norm_batch(level0, x, y)
        probes.append((rng.uniform(*t_range), TangentVector(x, y)))
    return probes


def jacobi_coefficient_matrix(surface, x, y) -> np.ndarray:
    """Coefficient matrix A of the linear (J, K) system at a phase point:
    d/dt (J, K) = A (J, K) with A = [[-G, I], [M, -G]]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = surface.dim
    squeeze = x.ndim == 1
    if squeeze:
        x, y = x[None], y[None]
    g_mat = _gamma_contract(surface, x, y)
    curv = curvature_matrix_batch(surface, x, y)
    a = np.zeros(x.shape[:-1] + (2 * m, 2 * m))
    a[..., :m, :m] = -g_mat
    a[..., :m, m:] = np.eye(m)
    a[..., m:, :m] = curv
    a[..., m:, m:] = -g_mat
    return a[0] if squeeze else a


def coefficient_bound_along(surface, traj_states) -> float:
    """sup of the spectral norm of the (J, K) coefficient matrix along samples."""
    m = surface.dim
    states = np.asarray(traj_states, dtype=float)
    a = jacobi_coefficient_matrix(surface, states[..., :m], states[..., m:])
    return float(np.max(np.linalg.norm(a, ord=2, axis=(-2, -1))))


def measure_gronwall_margin(surface, v: TangentVector, j0, t_end, tol=None):
    """Integrate the joint system and compare sup |(J,K)(t)| with the bound.

    Returns dict with the measured sup, the coefficient bound along the
    trajectory, and the certified bound at each sample's time.
    """
    from .jacobi import _propagate_columns

    jk0 = np.stack([np.asarray(j0.J, dtype=float), np.asarray(j0.K, dtype=float)])[..., None]
    res, _ = _propagate_columns(surface, v, jk0, t_end, tol, "joint")
    if res.status != "Completed":
        raise OutOfDomain(f"trajectory ended early ({res.status})")
    m = surface.dim
    states = res.states
    jk = states[:, 2 * m:]
    norms = np.linalg.norm(jk, axis=1)
    c_bar = coefficient_bound_along(surface, states[:, : 2 * m])
    bounds = np.linalg.norm(jk[0]) * np.exp(c_bar * res.times)
    return {
        "c_bar": c_bar,
        "norms": norms,
        "bounds": bounds,
        "times": res.times,
        "dominated": bool(np.all(norms <= bounds * (1 + 1e-9) + 1e-12)),
    }


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------


def lipschitz_flow_report(surface, t_end=0.3, n_pairs=200, seed=0, delta_range=(1e-4, 1e-2)):
    """Difference quotients of the flow map over random nearby tangent pairs.

    All trajectories integrate as one batch with a shared controller; the
    quotient bound exp(c_bar * t) uses the coefficient bound measured along
    the batch samples.
    """
    from . import integrate
    from .flow import default_tolerances, make_geodesic_rhs, step_cap
    from .surface import g_norm_batch

    rng = np.random.default_rng(seed)
    m = surface.dim
    center = 0.5 * (surface.domain_lo + surface.domain_hi)
    half = 0.5 * (surface.domain_hi - surface.domain_lo)
    ics = []
    for _ in range(n_pairs):
        while True:
            x = center + (rng.random(m) - 0.5) * 0.6 * half
            if surface.contains(x):
                break
        y = rng.normal(size=m)
        y /= g_norm_batch(surface, x, y)
        base = np.concatenate([x, y])
        delta = np.exp(rng.uniform(np.log(delta_range[0]), np.log(delta_range[1])))
        d = rng.normal(size=2 * m)
        d *= delta / np.linalg.norm(d)
        ics.append(base)
        ics.append(base + d)
    ics = np.array(ics)

    geo = make_geodesic_rhs(surface)

    def rhs(u_flat):
        return geo(u_flat.reshape(ics.shape)).ravel()

    def inside(u_flat):
        return bool(np.all(surface.contains_batch(u_flat.reshape(ics.shape)[:, :m])))

    rtol, atol = default_tolerances(surface)
    res = integrate.integrate_adaptive(
        rhs, ics.ravel(), t_end, rtol, atol, max_step=step_cap(surface), inside=inside
    )
    if res.status != "Completed":
        raise OutOfDomain(f"perturbation batch ended early ({res.status})")
    ends = res.final_state.reshape(ics.shape)
    gaps = np.linalg.norm(ics[1::2] - ics[0::2], axis=1)
    devs = np.linalg.norm(ends[1::2] - ends[0::2], axis=1)
    quotients = devs / gaps

    stride = max(1, len(res.times) // 40)
    sample_states = res.states[::stride].reshape(-1, ics.shape[0], 2 * m)
    flat_states = sample_states.reshape(-1, 2 * m)
    c_bar = coefficient_bound_along(surface, flat_states)
    bound = float(np.exp(c_bar * t_end))
    return {
        "t_end": t_end,
        "quotients": quotients,
        "max_quotient": float(np.max(quotients)),
        "c_bar": c_bar,
        "bound": bound,
        "bounded": bool(np.max(quotients) <= bound),
    }


def _modulus_probes(surface, t1, n_centers, deltas, seed, j0=None, direction=None,
                    tol=None, t_grid_pts=25):
    """Trajectories of the joint system from paired base points.

    For each center x0 and gap delta, the partner starts at x0 + delta * dir.
    Returns per-pair gaps, sup-t coefficient deviations, final-state
    deviations, and the measured constants c_tilde (solution sup) and
    c_bar (coefficient sup).
    """
    from .jacobi import _propagate_columns
    from .surface import g_norm_batch

    rng = np.random.default_rng(seed)
    m = surface.dim
    if j0 is None:
        j0 = np.array([0.0, 0.0, 0.8, 0.6])  # generic: engages every block
    if direction is None:
        direction = np.array([1.0, 0.35])
    direction = direction / np.linalg.norm(direction)
    center = 0.5 * (surface.domain_lo + surface.domain_hi)
    half = 0.5 * (surface.domain_hi - surface.domain_lo)
    t_grid = np.linspace(0.0, t1, t_grid_pts)

    def run(x0):
        y0 = direction / float(g_norm_batch(surface, x0, direction))
        jk0 = np.stack([j0[:m], j0[m:]])[..., None]
        res, _ = _propagate_columns(
            surface, TangentVector(x0, y0), jk0, t1, tol, "joint",
            checkpoints=t_grid[1:-1],
        )
        if res.status != "Completed":
            raise OutOfDomain(f"modulus probe ended early ({res.status})")
        idx = np.searchsorted(res.times, t_grid - 1e-12)
        idx = np.clip(idx, 0, len(res.times) - 1)
        samples = res.states[idx]
        return samples  # (T, 2m + 2m)

    pairs = []
    all_states = []
    for _ in range(n_centers):
        while True:
            x0 = center + (rng.random(m) - 0.5) * 0.5 * half
            if surface.contains(x0):
                break
        base = run(x0)
        all_states.append(base)
        for delta in deltas:
            d = rng.normal(size=m)
            d *= delta / np.linalg.norm(d)
            x1 = x0 + d
            if not surface.contains(x1):
                continue
            other = run(x1)
            all_states.append(other)
            a_base = jacobi_coefficient_matrix(surface, base[:, :m], base[:, m: 2 * m])
            a_other = jacobi_coefficient_matrix(surface, other[:, :m], other[:, m: 2 * m])
            da = float(np.max(np.linalg.norm(a_base - a_other, ord=2, axis=(-2, -1))))
            dx = float(np.linalg.norm(base[-1, 2 * m:] - other[-1, 2 * m:]))
            pairs.append((float(np.linalg.norm(d)), da, dx))

    states = np.concatenate(all_states)
    c_tilde = float(np.max(np.linalg.norm(states[:, 2 * m:], axis=1)))
    c_bar = coefficient_bound_along(surface, states[:, : 2 * m])
    gaps = np.array([p[0] for p in pairs])
    coeff_dev = np.array([p[1] for p in pairs])
    state_dev = np.array([p[2] for p in pairs])
    return gaps, coeff_dev, state_dev, c_tilde, c_bar


def osgood_dominance_report(surface, t1=0.3, n_centers=8, deltas=None, seed=0, tol=None):
    """Empirical modulus of x0 -> (J, K)(t1) against the transfer bound Gamma.

    Gamma is built from the same probe set: inner modulus = binned coefficient
    deviations, constants measured along the probe trajectories.
    """
    if deltas is None:
        deltas = np.logspace(-3, -1, 7)
    gaps, coeff_dev, state_dev, c_tilde, c_bar = _modulus_probes(
        surface, t1, n_centers, deltas, seed, tol=tol
    )
    mu_r = empirical_modulus(zip(gaps, coeff_dev))
    gamma = osgood_gamma(mu_r, c_tilde, c_bar, t1)
    emp = empirical_modulus(zip(gaps, state_dev))
    edges, values = emp.populated_bins()
    limits = gamma(edges)
    margins = limits - values
    dominated = bool(np.all(margins >= -1e-12))
    return {
        "t1": t1,
        "c_tilde": c_tilde,
        "c_bar": c_bar,
        "empirical": emp,
        "gamma": gamma,
        "edges": edges,
        "values": values,
        "limits": limits,
        "margins": margins,
        "dominated": dominated,
    }


def holder_dominance_report(surface, alpha, t1=0.3, n_centers=8, deltas=None, seed=0, tol=None):
    """Hoelder-form transfer: deviations of (J, K)(t1) against C * delta^alpha
    with C = c_tilde * t1 * exp(c_bar * t1) * (measured Hoelder constant of
    the coefficients)."""
    if deltas is None:
        deltas = np.logspace(-3, -1, 7)
    gaps, coeff_dev, state_dev, c_tilde, c_bar = _modulus_probes(
        surface, t1, n_centers, deltas, seed, tol=tol
    )
    c_r = float(np.max(coeff_dev / gaps ** alpha))
    c_bound = c_tilde * t1 * np.exp(c_bar * t1) * c_r
    holds, rep = holder_modulus_check(zip(gaps, state_dev), alpha, c_bound)
    rep.update(
        {"alpha": alpha, "c_r": c_r, "c_bound": c_bound, "c_tilde": c_tilde, "c_bar": c_bar}
    )
    return rep
