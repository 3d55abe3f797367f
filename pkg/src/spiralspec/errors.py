"""Exception hierarchy shared by all modules."""


class SpiralError(Exception):
    """Base class for every error raised by the package."""

    module = "spiralspec"


class DomainError(SpiralError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(DomainError):
    """A query falls outside the tabulated range of a cache."""


class NumericalError(SpiralError, RuntimeError):
    """An iterative or adaptive procedure failed to reach its tolerance.

    ``estimate`` and ``error`` carry the best value obtained so far and its
    error bound, when available.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class GeometryError(SpiralError):
    """The spiral geometry does not admit the requested construction."""


class AssumptionViolation(SpiralError):
    """The profile violates the standing smoothness/shrinking assumptions."""


class NotSimpleError(SpiralError):
    """The width function is not monotone on the scanned range."""


class MissedEigenvalueError(SpiralError):
    """Eigensolver count disagrees with the inertia count."""


class ConfigError(SpiralError, ValueError):
    """Invalid run configuration."""
