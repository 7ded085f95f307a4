"""Geodesic flow: first-order system, trajectories, exponential map.

The chart state is s = (x, y) with dx/dt = y and dy_k/dt = -Gamma^k_ij y_i y_j.
Trajectories stop at the chart boundary (located by bisection) and report why
they ended. Integration is adaptive by default; surfaces with merely bounded
second derivatives get a hard cap on the step size because the embedded error
estimate is unreliable across curvature jumps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import integrate
from .errors import OutOfDomain
from .surface import christoffel_batch, g_norm_batch


@dataclass(frozen=True)
class TangentVector:
    """Chart point plus chart velocity components."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))

    def as_state(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @staticmethod
    def from_state(u: np.ndarray) -> "TangentVector":
        m = u.size // 2
        return TangentVector(u[:m], u[m:])


# Same layout; the name marks its role as ODE state.
PhaseState = TangentVector


@dataclass
class Trajectory:
    times: np.ndarray      # strictly increasing sample times
    states: np.ndarray     # (K, 2m) rows (x, y)
    exit_reason: str       # Completed | LeftChart | StepFailure
    speed: float           # g-norm of the initial velocity

    @property
    def final(self) -> TangentVector:
        return TangentVector.from_state(self.states[-1])

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def positions(self, dim) -> np.ndarray:
        return self.states[:, :dim]

    def velocities(self, dim) -> np.ndarray:
        return self.states[:, dim:]


def default_tolerances(surface) -> tuple[float, float]:
    """(rtol, atol) by regularity class, sitting below the tolerances the
    verification suites assert."""
    if surface.regularity.at_least("C3"):
        return 1e-10, 1e-12
    return 1e-9, 1e-11


def step_cap(surface) -> float:
    """Hard step cap; finite only for surfaces with discontinuous hessian."""
    if surface.regularity.tag == "C11":
        return 1e-3 * surface.width
    return np.inf


def make_geodesic_rhs(surface):
    """Vectorized right-hand side on flat states (..., 2m)."""
    m = surface.dim

    def rhs(u):
        u = np.asarray(u, dtype=float)
        x = u[..., :m]
        y = u[..., m:]
        gamma = christoffel_batch(surface, x)
        acc = -np.einsum("...kij,...i,...j->...k", gamma, y, y)
        return np.concatenate([y, acc], axis=-1)

    return rhs


def geodesic_rhs(surface, s: PhaseState) -> PhaseState:
    """Derivative (y, -Gamma(y, y)) of the first-order geodesic system."""
    x = surface.require_inside(s.x)
    du = make_geodesic_rhs(surface)(np.concatenate([x, s.y]))
    return PhaseState.from_state(du)


def _state_inside(surface):
    m = surface.dim

    def inside(u):
        return surface.contains(u[:m])

    return inside


def integrate_geodesic(
    surface,
    v: TangentVector,
    t_end: float,
    tol: float | None = None,
    *,
    max_step: float | None = None,
    checkpoints=None,
    method: str = "adaptive",
    fixed_step: float | None = None,
    max_steps: int = 500_000,
) -> Trajectory:
    """Integrate the geodesic with gamma'(0) = v up to t_end or chart exit."""
    x0 = surface.require_inside(v.x)
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    u0 = np.concatenate([x0, np.asarray(v.y, dtype=float)])
    speed = float(g_norm_batch(surface, x0, v.y))
    rhs = make_geodesic_rhs(surface)
    inside = _state_inside(surface)
    if method == "rk4":
        if fixed_step is None:
            raise ValueError("rk4 method requires fixed_step")
        res = integrate.integrate_fixed_rk4(rhs, u0, t_end, fixed_step, inside=inside)
    else:
        rtol, atol = default_tolerances(surface)
        if tol is not None:
            rtol, atol = tol, tol * 1e-2
        cap = step_cap(surface) if max_step is None else max_step
        res = integrate.integrate_adaptive(
            rhs, u0, t_end, rtol, atol, max_step=cap, inside=inside,
            checkpoints=checkpoints, max_steps=max_steps,
        )
    return Trajectory(res.times, res.states, res.status, speed)


def geodesic_flow(surface, t: float, v: TangentVector, tol: float | None = None, **kw) -> TangentVector:
    """State of the geodesic with initial tangent v after time t."""
    if t == 0.0:
        surface.require_inside(v.x)
        return TangentVector(v.x.copy(), np.asarray(v.y, dtype=float).copy())
    if t < 0.0:
        # Run the reflected geodesic forward: phi(-t, (x, y)) = N(phi(t, N v)).
        out = geodesic_flow(surface, -t, TangentVector(v.x, -np.asarray(v.y, dtype=float)), tol, **kw)
        return TangentVector(out.x, -out.y)
    traj = integrate_geodesic(surface, v, t, tol, **kw)
    if traj.exit_reason != integrate.COMPLETED:
        raise OutOfDomain(
            f"geodesic ended at t={traj.final_time:.6g} < {t:g} ({traj.exit_reason})"
        )
    return traj.final


def exp_map(surface, v: TangentVector, tol: float | None = None) -> np.ndarray:
    """Base point of the time-one flow."""
    return geodesic_flow(surface, 1.0, v, tol).x


def flow_property_residual(surface, s: float, t: float, v: TangentVector, tol: float | None = None) -> float:
    """Chart distance between phi(s + t, v) and phi(s, phi(t, v))."""
    if s == 0.0:
        return 0.0
    a = geodesic_flow(surface, s + t, v, tol)
    mid = geodesic_flow(surface, t, v, tol)
    b = geodesic_flow(surface, s, mid, tol)
    return float(np.linalg.norm(a.as_state() - b.as_state()))


def speed_profile(surface, traj: Trajectory) -> np.ndarray:
    """g-norm of the velocity at every trajectory sample."""
    m = surface.dim
    return g_norm_batch(surface, traj.states[:, :m], traj.states[:, m:])


def trajectory_rows(surface, traj: Trajectory) -> np.ndarray:
    """Columns t, x1..xm, y1..ym, speed for CSV output."""
    sp = speed_profile(surface, traj)
    return np.column_stack([traj.times, traj.states, sp])
