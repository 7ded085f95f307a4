"""Explicit Runge-Kutta integrators with adaptive step control.

Dormand-Prince 5(4) embedded pair with a PI step-size controller, plus a
classical fixed-step RK4 kept for reproducible convergence studies. Both
integrate autonomous systems u' = f(u). A membership predicate may be
supplied; when an accepted step lands outside, the crossing is located by
bisection and the run stops there with status ``left_chart``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfChart

COMPLETED = "Completed"
LEFT_CHART = "LeftChart"
STEP_FAILURE = "StepFailure"

# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_ERR = _DP_B5 - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


@dataclass
class IntegrationResult:
    times: np.ndarray          # (K,)
    states: np.ndarray         # (K, d)
    status: str                # Completed | LeftChart | StepFailure
    n_accepted: int = 0
    n_rejected: int = 0

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def rk4_step(f, u, h):
    k1 = f(u)
    k2 = f(u + 0.5 * h * k1)
    k3 = f(u + 0.5 * h * k2)
    k4 = f(u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_span(f, u, span, n_sub=8):
    """Advance u over `span` with n_sub classical RK4 steps."""
    h = span / n_sub
    for _ in range(n_sub):
        u = rk4_step(f, u, h)
    return u


def _bisect_exit(f, u_in, h_out, inside, tol=1e-12):
    """Locate the boundary crossing inside (0, h_out] from a state known inside.

    Returns (tau, state) with state the last trial point still inside.
    """
    def trial(tau):
        if tau == 0.0:
            return u_in
        try:
            u = _rk4_span(f, u_in, tau)
        except (OutOfChart, FloatingPointError):
            return None
        if not np.all(np.isfinite(u)):
            return None
        return u

    lo, hi = 0.0, h_out
    u_lo = u_in
    for _ in range(80):
        if hi - lo <= tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        u_mid = trial(mid)
        if u_mid is not None and inside(u_mid):
            lo, u_lo = mid, u_mid
        else:
            hi = mid
    return lo, u_lo


def _initial_step(f0, u0, rtol, atol, t_end, max_step):
    scale = atol + rtol * np.abs(u0)
    d0 = np.sqrt(np.mean((u0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h = 0.01 * d0 / d1 if d1 > 1e-12 else 1e-4 * t_end
    return float(min(h, 0.1 * t_end, max_step))


def integrate_adaptive(
    f,
    u0,
    t_end,
    rtol=1e-10,
    atol=1e-12,
    *,
    max_step=np.inf,
    inside=None,
    checkpoints=None,
    max_steps=500_000,
    safety=0.9,
):
    """Integrate u' = f(u) from t=0 to t_end with adaptive DP5(4) steps.

    checkpoints: optional increasing times the stepper must land on exactly
    (sample times end up in the returned arrays). inside: predicate on the
    full state; a violation after an accepted step triggers exit bisection.
    """
    u = np.asarray(u0, dtype=float).copy()
    t = 0.0
    times = [0.0]
    states = [u.copy()]
    n_acc = n_rej = 0

    cps = np.asarray([] if checkpoints is None else checkpoints, dtype=float)
    cps = np.unique(cps[(cps > 1e-15) & (cps < t_end - 1e-15)])
    cp_idx = 0

    def eval_rhs(x):
        k = f(x)
        if not np.all(np.isfinite(k)):
            raise OutOfChart("non-finite right-hand side")
        return k

    try:
        f_cur = eval_rhs(u)
    except OutOfChart:
        return IntegrationResult(np.array(times), np.array(states), STEP_FAILURE)

    h = _initial_step(f_cur, u, rtol, atol, t_end, max_step)
    h_min = 1e-14 * max(1.0, t_end)
    err_old = 1e-4
    stages = np.empty((7, u.size))

    while t < t_end - 1e-14 * max(1.0, t_end):
        target = t_end
        if cp_idx < len(cps):
            target = min(target, cps[cp_idx])
        h = min(h, max_step, target - t)
        if h < h_min:
            h = h_min

        stages[0] = f_cur
        failed_stage = False
        try:
            for i in range(1, 7):
                du = h * (_DP_A[i] @ stages[:i])
                stages[i] = eval_rhs(u + du)
        except OutOfChart:
            failed_stage = True

        if failed_stage:
            n_rej += 1
            h *= 0.25
            if h < h_min:
                return IntegrationResult(
                    np.array(times), np.array(states), STEP_FAILURE, n_acc, n_rej
                )
            continue

        u_new = u + h * (_DP_B5 @ stages)
        err_vec = h * (_DP_ERR @ stages)
        scale = atol + rtol * np.maximum(np.abs(u), np.abs(u_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

        if err <= 1.0 or h <= h_min * 1.0001:
            t_new = t + h
            if inside is not None and not inside(u_new):
                tau, u_exit = _bisect_exit(f, u, h, inside)
                times.append(t + tau)
                states.append(u_exit)
                return IntegrationResult(
                    np.array(times), np.array(states), LEFT_CHART, n_acc + 1, n_rej
                )
            t, u = t_new, u_new
            f_cur = stages[6].copy()  # FSAL: last stage is f at the new point
            times.append(t)
            states.append(u.copy())
            n_acc += 1
            if cp_idx < len(cps) and t >= cps[cp_idx] - 1e-13:
                cp_idx += 1
            fac = safety * err ** -0.17 * err_old ** 0.04 if err > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
            err_old = max(err, 1e-10)
        else:
            n_rej += 1
            h *= min(1.0, max(0.2, safety * err ** -0.2))
            if h < h_min:
                return IntegrationResult(
                    np.array(times), np.array(states), STEP_FAILURE, n_acc, n_rej
                )

        if n_acc + n_rej > max_steps:
            return IntegrationResult(
                np.array(times), np.array(states), STEP_FAILURE, n_acc, n_rej
            )

    return IntegrationResult(np.array(times), np.array(states), COMPLETED, n_acc, n_rej)


def integrate_fixed_rk4(f, u0, t_end, step, *, inside=None):
    """Fixed-step RK4; stops at the chart boundary like the adaptive driver."""
    u = np.asarray(u0, dtype=float).copy()
    n = max(1, int(np.ceil(t_end / step)))
    h = t_end / n
    t = 0.0
    times = [0.0]
    states = [u.copy()]
    for _ in range(n):
        try:
            u_new = rk4_step(f, u, h)
            ok = np.all(np.isfinite(u_new))
        except (OutOfChart, FloatingPointError):
            ok = False
            u_new = None
        if not ok or (inside is not None and not inside(u_new)):
            tau, u_exit = _bisect_exit(f, u, h, inside or (lambda s: True))
            times.append(t + tau)
            states.append(u_exit)
            return IntegrationResult(np.array(times), np.array(states), LEFT_CHART, len(times) - 1, 0)
        t, u = t + h, u_new
        times.append(t)
        states.append(u.copy())
    return IntegrationResult(np.array(times), np.array(states), COMPLETED, n, 0)
