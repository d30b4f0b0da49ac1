"""Exception hierarchy.

Validation problems derive from :class:`ValueError`, numerical failures from
:class:`SolverError` (a :class:`RuntimeError`).  The CLI maps the two families
onto distinct exit codes.
"""


class FracNormError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FracNormError, ValueError):
    pass


class InvalidParams(ValidationError):
    pass


class InvalidGrid(ValidationError):
    pass


class InvalidOrder(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class UnsupportedNonlinearity(ValidationError):
    pass


class ZeroField(ValidationError):
    pass


class DegeneratePair(ValidationError):
    pass


class RegimeError(ValidationError):
    """A solver was asked to run outside the coupling regime it covers."""


class SolverError(FracNormError, RuntimeError):
    pass


class NoConvergence(SolverError):
    pass


class Stagnation(SolverError):
    pass


class GridTooSmall(SolverError):
    pass


class NoPositiveRoot(SolverError):
    pass


class NegativeMultiplier(SolverError):
    pass


class StepCollapse(SolverError):
    pass


class ArtifactError(FracNormError, OSError):
    """Missing, unreadable or malformed artifact or configuration file."""
