"""Command-line front end: surface catalog, experiments, machine-readable output.

Commands
--------
surface list | surface info <name>
geodesic        integrate one geodesic, write trajectory CSV + summary JSON
jacobian        flow differential at (t, v), optionally with the FD oracle
smooth-converge mollified-family convergence report
minimality      shortest-path margin report for one geodesic
report          run verification suites, aggregate JSON, exit 0 iff all pass

Exit codes: 0 success, 1 failed verdict, 2 bad configuration, 3 out of domain.
All randomness derives from the seed recorded in the output. GEOFLOW_THREADS
caps the worker pool used for independent probes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import regularity as reg
from . import serialize
from .catalog import CATALOG, make_surface, surface_from_spec
from .errors import (
    ConfigError,
    DomainTooSmall,
    GeoflowError,
    OutOfChart,
    OutOfDomain,
    UnknownSurface,
)
from .flow import (
    TangentVector,
    flow_property_residual,
    geodesic_flow,
    integrate_geodesic,
    speed_profile,
)
from .jacobi import JacobiState, fd_flow_differential, flow_differential, propagate_jacobi
from .minimality import build_mesh_oracle, minimality_report, short_geodesic
from .surface import curvature_from_christoffel, curvature_operator, g_norm_batch

SCHEMA = 1


@dataclass
class RunConfig:
    surface: dict = field(default_factory=lambda: {"type": "catalog", "name": "flat"})
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    suites: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return RunConfig(**d)

    @staticmethod
    def load(path: str) -> "RunConfig":
        with open(path) as fh:
            return RunConfig.from_dict(json.load(fh))


DEFAULT_TOLERANCES = {
    "conservation": 1e-8,
    "composition": 1e-7,
    "fd_match": 1e-5,
    "gauss_rel": 1e-5,
    "sphere_jacobi": 1e-7,
    "margin": 0.0,
}


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GEOFLOW_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over independent work items, threaded when allowed."""
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _resolve_surface(cfg: RunConfig):
    try:
        return surface_from_spec(cfg.surface)
    except UnknownSurface:
        raise
    except KeyError as exc:
        raise ConfigError(f"surface spec missing key {exc}") from exc


def _parse_vec(text: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def _out_path(cfg: RunConfig, key: str, default: str) -> str:
    return cfg.output.get(key, default)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_surface(args, cfg: RunConfig) -> int:
    if args.action == "list":
        for name, entry in CATALOG.items():
            print(f"{name:12s} {entry.regularity:12s} {entry.description}")
        return 0
    name = args.name
    if name not in CATALOG:
        print(f"error: unknown surface {name!r}", file=sys.stderr)
        return 2
    entry = CATALOG[name]
    surf = make_surface(name)
    info = {
        "schema": SCHEMA,
        "name": name,
        "regularity": str(surf.regularity),
        "domain": [[float(a), float(b)] for a, b in zip(surf.domain_lo, surf.domain_hi)],
        "grad_sup": surf.bounds.grad_sup,
        "hess_sup": surf.bounds.hess_sup,
        "oracles": {k: v for k, v in entry.oracles.items()},
        "description": entry.description,
    }
    print(serialize.dumps(info))
    return 0


def cmd_geodesic(args, cfg: RunConfig) -> int:
    surface = _resolve_surface(cfg)
    x0 = _parse_vec(args.x0)
    y0 = _parse_vec(args.y0)
    if not surface.contains(x0):
        print("error: x0 outside the chart domain", file=sys.stderr)
        return 2
    traj = integrate_geodesic(surface, TangentVector(x0, y0), args.t_end, args.tol)
    speeds = speed_profile(surface, traj)
    drift = float(np.max(np.abs(speeds - traj.speed))) / max(traj.speed, 1e-300)
    summary = {
        "schema": SCHEMA,
        "surface": surface.name,
        "seed": cfg.seed,
        "t_requested": float(args.t_end),
        "t_reached": traj.final_time,
        "exit_reason": traj.exit_reason,
        "final_x": traj.final.x,
        "final_y": traj.final.y,
        "speed": traj.speed,
        "speed_drift": drift,
    }
    csv_path = args.out or _out_path(cfg, "trajectory_csv", "geodesic.csv")
    serialize.write_trajectory_csv(csv_path, surface, traj)
    json_path = _out_path(cfg, "summary_json", "geodesic.json")
    serialize.write_json(json_path, summary)
    print(serialize.dumps(summary))
    return 0


def cmd_jacobian(args, cfg: RunConfig) -> int:
    surface = _resolve_surface(cfg)
    x0 = _parse_vec(args.x0)
    y0 = _parse_vec(args.y0)
    v = TangentVector(x0, y0)
    try:
        fd = flow_differential(surface, args.t, v, args.tol)
        out = {
            "schema": SCHEMA,
            "t": float(args.t),
            "v": {"x": x0, "y": y0},
            "matrix": fd.matrix,
        }
        if args.fd_check:
            num = fd_flow_differential(surface, args.t, v)
            out["fd_matrix"] = num
            out["max_abs_diff"] = float(np.max(np.abs(num - fd.matrix)))
    except (OutOfDomain, OutOfChart) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    path = args.out or _out_path(cfg, "jacobian_json", "jacobian.json")
    serialize.write_json(path, out)
    print(serialize.dumps(out))
    return 0


def cmd_smooth_converge(args, cfg: RunConfig) -> int:
    surface = _resolve_surface(cfg)
    if surface.regularity.at_least("C3"):
        print(
            f"warning: {surface.name!r} is {surface.regularity}; the smoothing "
            "study targets surfaces of class C2 and below",
            file=sys.stderr,
        )
    scales = [float(s) for s in args.scales.split(",")]
    try:
        seq = reg.approximation_sequence(surface, scales)
        rng = np.random.default_rng(cfg.seed)
        probes = reg.convergence_probes(seq, args.probes, rng)
        report = reg.flow_convergence_report(seq, probes)
    except (DomainTooSmall, OutOfDomain) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    out = {"schema": SCHEMA, "surface": surface.name, "seed": cfg.seed}
    out.update(report.as_dict())
    path = args.out or _out_path(cfg, "convergence_json", "convergence.json")
    serialize.write_json(path, out)
    csv_path = _out_path(cfg, "convergence_csv", "delta-vs-level.csv")
    rows = [
        [i, scales[i], seq.metric_c1_dist[i], seq.pi_c0_dist[i],
         report.flow_c0[i] if i < len(report.flow_c0) else np.nan,
         report.dflow_c0[i] if i < len(report.dflow_c0) else np.nan]
        for i in range(len(scales))
    ]
    serialize.write_csv(csv_path, ["level", "scale", "metric_c1", "pi_c0", "flow_c0", "dflow_c0"], rows)
    print(serialize.dumps(out))
    return 0


def cmd_minimality(args, cfg: RunConfig) -> int:
    surface = _resolve_surface(cfg)
    x0 = _parse_vec(args.x0)
    y0 = _parse_vec(args.y0)
    try:
        traj = integrate_geodesic(surface, TangentVector(x0, y0), args.t_end)
        if traj.exit_reason != "Completed":
            raise OutOfDomain(f"geodesic ended early ({traj.exit_reason})")
        oracle = build_mesh_oracle(surface, args.resolution)
        rep = minimality_report(surface, traj, oracle)
    except (OutOfDomain, OutOfChart) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    out = {"schema": SCHEMA, "surface": surface.name, "resolution": args.resolution}
    out.update(rep)
    path = args.out or _out_path(cfg, "minimality_json", "minimality.json")
    serialize.write_json(path, out)
    print(serialize.dumps(out))
    return 0


# ---------------------------------------------------------------------------
# verification suites for `report`
# ---------------------------------------------------------------------------


def _random_tangent(surface, rng, speed=1.0, shrink=0.5):
    center = 0.5 * (surface.domain_lo + surface.domain_hi)
    half = 0.5 * (surface.domain_hi - surface.domain_lo)
    while True:
        x = center + (rng.random(surface.dim) - 0.5) * shrink * half
        if surface.contains(x):
            break
    y = rng.normal(size=surface.dim)
    y *= speed / g_norm_batch(surface, x, y)
    return TangentVector(x, y)


def _suite_surface(tols, seed):
    rng = np.random.default_rng(seed)
    checks = []
    for name in ("hemisphere", "trough"):
        surf = make_surface(name)
        worst = 0.0
        scale = max(surf.bounds.hess_sup ** 2, 1e-8)
        for _ in range(20):
            v = _random_tangent(surf, rng)
            j = rng.normal(size=2)
            a = curvature_operator(surf, v.x, v.y) @ j
            b = curvature_from_christoffel(surf, v.x, v.y, j)
            rel = np.max(np.abs(a - b)) / max(np.max(np.abs(b)), scale)
            worst = max(worst, float(rel))
        checks.append(
            {"name": f"gauss_consistency_{name}", "value": worst,
             "limit": tols["gauss_rel"], "passed": bool(worst <= tols["gauss_rel"])}
        )
    return checks


def _suite_flow(tols, seed):
    rng = np.random.default_rng(seed)
    checks = []
    for name in ("flat", "hemisphere", "trough", "c21_cubic", "c2alpha"):
        surf = make_surface(name)
        v = _random_tangent(surf, rng)
        traj = integrate_geodesic(surf, v, 0.4)
        drift = float(
            np.max(np.abs(speed_profile(surf, traj) - traj.speed)) / traj.speed
        )
        checks.append(
            {"name": f"speed_conservation_{name}", "value": drift,
             "limit": tols["conservation"], "passed": bool(drift <= tols["conservation"])}
        )
        res = flow_property_residual(surf, 0.15, 0.2, v)
        checks.append(
            {"name": f"composition_{name}", "value": res,
             "limit": tols["composition"], "passed": bool(res <= tols["composition"])}
        )
    return checks


def _suite_jacobi(tols, seed):
    rng = np.random.default_rng(seed)
    checks = []
    for name in ("flat", "hemisphere", "trough"):
        surf = make_surface(name)
        worst = 0.0
        for _ in range(5):
            v = _random_tangent(surf, rng)
            t = rng.uniform(0.2, 0.4)
            a = flow_differential(surf, t, v, tol=1e-11).matrix
            b = fd_flow_differential(surf, t, v)
            worst = max(worst, float(np.max(np.abs(a - b))))
        checks.append(
            {"name": f"fd_oracle_{name}", "value": worst,
             "limit": tols["fd_match"], "passed": bool(worst <= tols["fd_match"])}
        )
    hemi = make_surface("hemisphere")
    v = TangentVector([0.0, 0.0], [1.0, 0.0])
    worst = 0.0
    for t in (0.1, 0.3, 0.5):
        js = propagate_jacobi(hemi, v, JacobiState([0, 0], [0, 1.0]), t, tol=1e-11)
        worst = max(worst, abs(float(g_norm_batch(hemi, geodesic_flow(hemi, t, v).x, js.J)) - np.sin(t)))
    checks.append(
        {"name": "sphere_jacobi_sin", "value": worst,
         "limit": tols["sphere_jacobi"], "passed": bool(worst <= tols["sphere_jacobi"])}
    )
    return checks


def _suite_minimality(tols, seed):
    rng = np.random.default_rng(seed)
    checks = []
    for name in ("flat", "hemisphere", "vee"):
        surf = make_surface(name)
        oracle = build_mesh_oracle(surf, 64)
        worst = np.inf
        for _ in range(3):
            traj = short_geodesic(surf, rng, 0.3)
            rep = minimality_report(surf, traj, oracle)
            worst = min(worst, rep["margin"])
        checks.append(
            {"name": f"margin_{name}", "value": float(worst),
             "limit": tols["margin"], "passed": bool(worst >= tols["margin"])}
        )
    return checks


def _suite_regularity(tols, seed):
    rng = np.random.default_rng(seed)
    checks = []
    hemi = make_surface("hemisphere")
    ok = True
    for _ in range(10):
        v = _random_tangent(hemi, rng)
        j0 = JacobiState(rng.normal(size=2), rng.normal(size=2))
        rep = reg.measure_gronwall_margin(hemi, v, j0, 0.4)
        ok = ok and rep["dominated"]
    checks.append(
        {"name": "gronwall_dominance_hemisphere", "value": float(ok),
         "limit": 1.0, "passed": bool(ok)}
    )
    gamma = reg.osgood_gamma(reg.Modulus("Linear", coeff=1.0), 1.0, 1.0, 1.0)
    val = gamma(0.1)
    err = abs(val - 0.1 * np.e)
    checks.append(
        {"name": "gamma_formula", "value": float(err), "limit": 1e-12,
         "passed": bool(err <= 1e-12)}
    )
    err = abs(reg.injradius_lower_bound(1.0, 2 * np.pi) - np.pi)
    checks.append(
        {"name": "injradius_formula", "value": float(err), "limit": 1e-12,
         "passed": bool(err <= 1e-12)}
    )
    return checks


SUITES = {
    "surface": _suite_surface,
    "flow": _suite_flow,
    "jacobi": _suite_jacobi,
    "minimality": _suite_minimality,
    "regularity": _suite_regularity,
}


def cmd_report(args, cfg: RunConfig) -> int:
    names = args.suites.split(",") if args.suites else list(cfg.suites)
    names = [n for n in names if n]
    if not names:
        print("error: empty suite selection", file=sys.stderr)
        return 2
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"error: unknown suites {unknown}", file=sys.stderr)
        return 2
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(cfg.tolerances)
    results = {}
    for pair in zip(names, parallel_map(lambda n: SUITES[n](tols, cfg.seed), names)):
        name, checks = pair
        results[name] = {
            "passed": bool(all(c["passed"] for c in checks)),
            "checks": checks,
        }
    all_passed = all(r["passed"] for r in results.values())
    out = {
        "schema": SCHEMA,
        "seed": cfg.seed,
        "tolerances": tols,
        "suites": results,
        "all_passed": all_passed,
    }
    path = args.out or _out_path(cfg, "report_json", "report.json")
    serialize.write_json(path, out)
    print(serialize.dumps(out))
    return 0 if all_passed else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoflow", description=__doc__)
    p.add_argument("--config", help="JSON run configuration file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--surface", default=None, help="catalog surface name")
    p.add_argument("--alpha", type=float, default=None, help="exponent for c2alpha")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("surface", help="catalog listing and details")
    ps.add_argument("action", choices=["list", "info"])
    ps.add_argument("name", nargs="?", default=None)

    pg = sub.add_parser("geodesic", help="integrate one geodesic")
    pg.add_argument("--x0", required=True)
    pg.add_argument("--y0", required=True)
    pg.add_argument("--t-end", type=float, required=True, dest="t_end")
    pg.add_argument("--tol", type=float, default=None)
    pg.add_argument("--out", default=None, help="trajectory CSV path")

    pj = sub.add_parser("jacobian", help="flow differential at (t, v)")
    pj.add_argument("--x0", required=True)
    pj.add_argument("--y0", required=True)
    pj.add_argument("--t", type=float, required=True)
    pj.add_argument("--tol", type=float, default=None)
    pj.add_argument("--fd-check", action="store_true", dest="fd_check")
    pj.add_argument("--out", default=None)

    pc = sub.add_parser("smooth-converge", help="smoothing-family convergence study")
    pc.add_argument("--scales", default="0.1,0.05,0.025,0.0125")
    pc.add_argument("--probes", type=int, default=20)
    pc.add_argument("--out", default=None)

    pm = sub.add_parser("minimality", help="shortest-path margin for one geodesic")
    pm.add_argument("--x0", required=True)
    pm.add_argument("--y0", required=True)
    pm.add_argument("--t-end", type=float, required=True, dest="t_end")
    pm.add_argument("--resolution", type=int, default=128)
    pm.add_argument("--out", default=None)

    pr = sub.add_parser("report", help="run verification suites")
    pr.add_argument("--suites", default=None, help="comma list: " + ",".join(SUITES))
    pr.add_argument("--out", default=None)
    return p


_VALUE_FLAGS = {"--x0", "--y0", "--scales"}


def _join_value_flags(argv):
    """Rewrite ["--x0", "-0.1,0"] as ["--x0=-0.1,0"] so argparse does not
    mistake negative-leading vectors for option names."""
    out = []
    i = 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(_join_value_flags(list(argv)))
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.surface is not None:
            cfg.surface = {"type": "catalog", "name": args.surface}
            if args.alpha is not None:
                cfg.surface["alpha"] = args.alpha
        handler = {
            "surface": cmd_surface,
            "geodesic": cmd_geodesic,
            "jacobian": cmd_jacobian,
            "smooth-converge": cmd_smooth_converge,
            "minimality": cmd_minimality,
            "report": cmd_report,
        }[args.command]
        return handler(args, cfg)
    except (ConfigError, UnknownSurface, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OutOfChart as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeoflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
