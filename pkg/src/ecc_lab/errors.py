"""Exception types shared across the package."""


class EccError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateNormError(EccError):
    """A vector that must have usable magnitude is numerically zero."""


class SimplexViolationError(EccError):
    """An input expected on the probability simplex is not on it."""


class InvalidShapeError(EccError):
    """Constructor arguments describe an unusable shape."""


class ShapeMismatchError(EccError):
    """Operand shapes disagree."""


class NonMonotonicEpochError(EccError):
    """Snapshot epochs must strictly increase."""


class InvalidSpecError(EccError):
    """A dataset spec violates one of its invariants."""


class EmptyClassError(EccError):
    """A per-class statistic was requested for a class without enough samples."""


class UnseenClassError(EccError):
    """A center-bank row was consumed before any update reached it."""


class ConvergenceError(EccError):
    """An iterative routine hit its iteration cap before converging."""


class NonFiniteError(EccError):
    """A value left the finite floating-point range."""
