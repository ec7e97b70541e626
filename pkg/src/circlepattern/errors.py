"""Exception hierarchy shared by all modules."""


class CirclePatternError(Exception):
    """Base class for library errors."""


class MeshError(CirclePatternError, ValueError):
    """Malformed or non-manifold triangulation input."""


class DegenerateConfigurationError(CirclePatternError, ValueError):
    """Coincident points where distinct ones are required."""


class InvalidSystemError(CirclePatternError):
    """A cross ratio system violates its vertex equations."""


class DevelopError(CirclePatternError):
    """Layout on the cover could not be completed consistently.

    ``vertex`` holds the offending base vertex when known.
    """

    def __init__(self, message, vertex=None, gap=None):
        super().__init__(message)
        self.vertex = vertex
        self.gap = gap


class HolonomyError(CirclePatternError):
    """Holonomy generators are missing, inconsistent or non-commuting."""


class IllConditionedError(CirclePatternError):
    """Numerical rank decision is not trustworthy."""


class ConvergenceError(CirclePatternError):
    """Newton iteration failed to converge.

    ``trace`` is the list of residual norms of accepted iterates.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class RigidityCounterexample(CirclePatternError):
    """Two distinct Delaunay solutions with equal holonomy scalings were found."""
