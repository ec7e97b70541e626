"""Cross ratio systems and circle patterns on triangulated tori and spheres."""

from circlepattern.errors import (
    CirclePatternError,
    ConvergenceError,
    DegenerateConfigurationError,
    DevelopError,
    HolonomyError,
    IllConditionedError,
    InvalidSystemError,
    MeshError,
    RigidityCounterexample,
)

__version__ = "0.1.0"
