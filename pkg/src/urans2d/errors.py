"""Exception types shared across the solver."""


class UransError(Exception):
    """Base class for all solver errors."""


class InvalidParameterError(UransError, ValueError):
    """A scalar argument is outside its admissible range."""


class GeometryError(UransError):
    """Requested geometry is degenerate or self-intersecting."""


class MeshFormatError(UransError):
    """Mesh file could not be parsed."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class OrientationError(UransError):
    """A triangle has non-positive signed area."""


class TopologyError(UransError):
    """Mesh connectivity violates the manifold-with-boundary assumptions."""


class ConfigurationError(UransError):
    """Run configuration is inconsistent or incomplete."""


class NumericalInputError(UransError):
    """A numerical input that must be finite/nonnegative is not."""


class SolverError(UransError):
    """Linear or nonlinear solve failed."""


class UsageError(UransError):
    """Command line was used incorrectly."""
