"""Geodesic flows, exponential maps and flow differentials on graph charts.

Core entry points:

* catalog.make_surface / catalog.CATALOG — built-in surfaces of varying class
* surface — metric, Christoffel symbols, second fundamental form, curvature
* flow — geodesic integration, the flow map phi(t, v), the exponential map
* jacobi — variation fields, the flow differential and its FD oracle
* regularity — smoothing families, convergence reports, exponential and
  modulus-transfer bounds
* minimality — mesh shortest-path oracle and minimality margins
"""

from .catalog import CATALOG, make_surface, surface_from_spec
from .errors import (
    ConfigError,
    DegeneratePlane,
    DisconnectedMesh,
    DomainTooSmall,
    GeoflowError,
    OutOfChart,
    OutOfDomain,
    QuadratureFailure,
    StepFailure,
    UnknownSurface,
)
from .flow import PhaseState, TangentVector, Trajectory, exp_map, geodesic_flow, integrate_geodesic
from .jacobi import FlowDifferential, JacobiState, flow_differential, propagate_jacobi
from .surface import GraphSurface, GridSurface, Regularity

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "ConfigError",
    "DegeneratePlane",
    "DisconnectedMesh",
    "DomainTooSmall",
    "FlowDifferential",
    "GeoflowError",
    "GraphSurface",
    "GridSurface",
    "JacobiState",
    "OutOfChart",
    "OutOfDomain",
    "PhaseState",
    "QuadratureFailure",
    "Regularity",
    "StepFailure",
    "TangentVector",
    "Trajectory",
    "UnknownSurface",
    "exp_map",
    "flow_differential",
    "geodesic_flow",
    "integrate_geodesic",
    "make_surface",
    "propagate_jacobi",
    "surface_from_spec",
    "__version__",
]
