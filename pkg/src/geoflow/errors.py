"""Exception types shared across the package."""


class GeoflowError(Exception):
    """Base class for all library errors."""


class OutOfChart(GeoflowError):
    """A chart point lies outside the surface's coordinate domain."""


class OutOfDomain(GeoflowError):
    """A flow evaluation (t, v) lies outside the maximal flow domain."""


class StepFailure(GeoflowError):
    """The adaptive step controller could not meet the requested tolerance."""


class DegeneratePlane(GeoflowError):
    """The two vectors spanning a curvature plane are (numerically) dependent."""


class DomainTooSmall(GeoflowError):
    """The chart domain cannot accommodate the requested smoothing width."""


class QuadratureFailure(GeoflowError):
    """Adaptive quadrature did not converge."""


class UnknownSurface(GeoflowError):
    """Requested catalog surface does not exist."""


class DisconnectedMesh(GeoflowError):
    """No path between mesh vertices (defensive; cannot occur on a box grid)."""


class ConfigError(GeoflowError):
    """Invalid run configuration."""
