"""Discrete shortest-path oracle and local length-minimality checks.

The oracle is a king-move grid graph over the chart whose edges are weighted
by ambient chord length. Shortest vertex paths overestimate the intrinsic
distance by at most a mesh-resolution term times the king-move anisotropy
constant sec(pi/8), which the margin computation budgets explicitly. The
oracle needs height values only, so it also works on surfaces whose
derivatives are discontinuous.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .errors import DisconnectedMesh, OutOfChart, OutOfDomain
from .flow import TangentVector, Trajectory, integrate_geodesic, geodesic_flow
from .surface import g_norm_batch

KING_ANISOTROPY = 1.0 / np.cos(np.pi / 8.0)  # worst king-path overhead, 1.0824


@dataclass
class MeshGeodesicOracle:
    surface: object
    resolution: int
    vertices: np.ndarray       # (V, m) chart points
    graph: object              # CSR matrix of symmetric chord-length weights
    mesh_step: float           # largest per-axis grid spacing

    def snap(self, p) -> tuple[int, float]:
        """Nearest vertex index and its chart distance to p."""
        p = np.asarray(p, dtype=float)
        d = np.linalg.norm(self.vertices - p, axis=1)
        i = int(np.argmin(d))
        return i, float(d[i])


def build_mesh_oracle(surface, resolution: int = 64) -> MeshGeodesicOracle:
    """King-move mesh over the chart with ambient chord-length weights."""
    if resolution < 8:
        raise ValueError("resolution must be at least 8 per axis")
    m = surface.dim
    axes = [
        np.linspace(lo, hi, resolution)
        for lo, hi in zip(surface.domain_lo, surface.domain_hi)
    ]
    steps = [ax[1] - ax[0] for ax in axes]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    keep = surface.contains_batch(pts)
    index = -np.ones(len(pts), dtype=np.int64)
    index[keep] = np.arange(int(keep.sum()))
    verts = pts[keep]
    emb = surface.embed_batch(verts)

    shape = (resolution,) * m
    lin = np.arange(len(pts)).reshape(shape)
    rows, cols, vals = [], [], []
    for offset in product((-1, 0, 1), repeat=m):
        if all(o == 0 for o in offset) or offset < tuple(-o for o in offset):
            continue  # half of the offsets; weights are symmetric
        src = lin[tuple(slice(max(0, -o), resolution - max(0, o)) for o in offset)]
        dst = lin[tuple(slice(max(0, o), resolution - max(0, -o)) for o in offset)]
        a = index[src.ravel()]
        b = index[dst.ravel()]
        ok = (a >= 0) & (b >= 0)
        a, b = a[ok], b[ok]
        w = np.linalg.norm(emb[a] - emb[b], axis=1)
        rows.append(a)
        cols.append(b)
        vals.append(w)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    graph = coo_matrix(
        (np.concatenate([vals, vals]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(len(verts), len(verts)),
    ).tocsr()
    return MeshGeodesicOracle(surface, resolution, verts, graph, float(max(steps)))


def shortest_path(oracle: MeshGeodesicOracle, p, q):
    """(length, hop_count, snap_p, snap_q) of the shortest vertex path."""
    i, sp = oracle.snap(p)
    j, sq = oracle.snap(q)
    dist, pred = _dijkstra(
        oracle.graph, directed=False, indices=i, return_predecessors=True
    )
    if not np.isfinite(dist[j]):
        raise DisconnectedMesh(f"no mesh path between {p} and {q}")
    hops = 0
    k = j
    while k != i:
        k = pred[k]
        if k < 0:
            raise DisconnectedMesh("predecessor chain broken")
        hops += 1
    return float(dist[j]), hops, sp, sq


def shortest_path_length(oracle: MeshGeodesicOracle, p, q) -> float:
    return shortest_path(oracle, p, q)[0]


def curve_length(surface, samples) -> float:
    """Sum of ambient chord lengths of the embedded sample polyline."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or len(samples) < 2:
        raise ValueError("need at least 2 chart samples")
    if not np.all(surface.contains_batch(samples)):
        raise OutOfChart("curve sample outside the chart")
    emb = surface.embed_batch(samples)
    return float(np.sum(np.linalg.norm(np.diff(emb, axis=0), axis=1)))


def mesh_error_budget(surface, oracle: MeshGeodesicOracle, hops: int) -> float:
    """Resolution allowance: lift factor * anisotropy * mesh step * hop count."""
    lift = float(np.sqrt(1.0 + surface.bounds.grad_sup ** 2))
    return lift * KING_ANISOTROPY * oracle.mesh_step * hops


def minimality_margin(surface, traj: Trajectory, oracle: MeshGeodesicOracle) -> float:
    """shortest_path + budget - curve length; nonnegative certifies that the
    trajectory is no longer than any mesh competitor up to mesh error."""
    pts = traj.positions(surface.dim)
    if not (surface.contains(pts[0]) and surface.contains(pts[-1])):
        raise OutOfDomain("trajectory endpoints outside the oracle domain")
    mesh_len, hops, _, _ = shortest_path(oracle, pts[0], pts[-1])
    length = curve_length(surface, pts)
    return mesh_len + mesh_error_budget(surface, oracle, hops) - length


def minimality_report(surface, traj: Trajectory, oracle: MeshGeodesicOracle) -> dict:
    pts = traj.positions(surface.dim)
    mesh_len, hops, sp, sq = shortest_path(oracle, pts[0], pts[-1])
    length = curve_length(surface, pts)
    budget = mesh_error_budget(surface, oracle, hops)
    margin = mesh_len + budget - length
    return {
        "geodesic_length": length,
        "mesh_length": mesh_len,
        "error_budget": budget,
        "margin": margin,
        "hops": hops,
        "snap_distances": [sp, sq],
        "verdict": "minimal_within_mesh_error" if margin >= 0 else "violated",
    }


def branching_check(surface, v: TangentVector, t_end: float, step_sizes, perturbations,
                    reference_step: float | None = None) -> dict:
    """Uniqueness and stable dependence diagnostics for one initial condition.

    (a) endpoint spread of fixed-step runs against a reference refinement —
    shrinking spread indicates a unique limit trajectory; (b) Lipschitz
    quotients |phi(t, v) - phi(t, w)| / |v - w| over the perturbation set.
    """
    step_sizes = sorted(step_sizes, reverse=True)
    if reference_step is None:
        reference_step = step_sizes[-1] / 4.0
    runs = {}
    for s in list(step_sizes) + [reference_step]:
        traj = integrate_geodesic(surface, v, t_end, method="rk4", fixed_step=s)
        if traj.exit_reason != "Completed":
            raise OutOfDomain(f"geodesic left the chart at step size {s:g}")
        runs[s] = traj.final.as_state()
    ref = runs[reference_step]
    spreads = [float(np.linalg.norm(runs[s] - ref)) for s in step_sizes]
    # below the roundoff floor refinement cannot show further shrinkage
    floor = 1e-13 * max(1.0, float(np.linalg.norm(ref)))
    monotone = all(
        b <= a * (1 + 1e-9) + floor for a, b in zip(spreads, spreads[1:])
    )

    base_end = geodesic_flow(surface, t_end, v).as_state()
    quotients = []
    for w in perturbations:
        dv = np.linalg.norm(w.as_state() - v.as_state())
        if dv == 0:
            continue
        end = geodesic_flow(surface, t_end, w).as_state()
        quotients.append(float(np.linalg.norm(end - base_end) / dv))
    return {
        "step_sizes": list(map(float, step_sizes)),
        "spreads": spreads,
        "spread_monotone": bool(monotone),
        "quotients": quotients,
        "max_quotient": float(max(quotients)) if quotients else 0.0,
    }


def short_geodesic(surface, rng, max_length: float, t_ratio: float = 1.0) -> Trajectory:
    """Random unit-speed geodesic from the central chart region, of g-length
    at most max_length (used by the minimality test drivers)."""
    for _ in range(100):
        x = surface.domain_lo + (0.3 + 0.4 * rng.random(surface.dim)) * (
            surface.domain_hi - surface.domain_lo
        )
        if not surface.contains(x):
            continue
        y = rng.normal(size=surface.dim)
        y /= g_norm_batch(surface, x, y)
        t_end = max_length * (0.4 + 0.6 * rng.random()) * t_ratio
        traj = integrate_geodesic(surface, TangentVector(x, y), t_end)
        if traj.exit_reason == "Completed":
            return traj
    raise OutOfDomain("could not place a short geodesic inside the chart")
