"""Exception types raised by the library."""


class CompactqnError(Exception):
    """Base class for all library-specific errors."""


class DimensionMismatch(CompactqnError, ValueError):
    """Vector or matrix shapes are inconsistent with the structure."""


class NonFiniteInput(CompactqnError, ValueError):
    """An input contains NaN or infinity."""


class SingularTriangular(CompactqnError):
    """A triangular factor has a zero diagonal entry."""


class NotSymmetric(CompactqnError, ValueError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class EmptyHistory(CompactqnError):
    """The operation needs at least one stored pair."""


class ZeroVector(CompactqnError, ValueError):
    """A vector required to be nonzero is zero."""


class ZeroDenominator(CompactqnError):
    """An update denominator vanished."""


class NonPositiveCurvature(CompactqnError):
    """A pair violates the positive-curvature requirement."""


class IndefiniteShift(CompactqnError):
    """The shifted matrix is not positive definite."""


class DimensionTooLarge(CompactqnError, ValueError):
    """Refusing to materialize a matrix beyond the dense-size guard."""


class LineSearchFail(CompactqnError):
    """No step satisfying the strong Wolfe conditions was found."""


class LabelOutOfRange(CompactqnError, ValueError):
    """A class label is outside 0..C-1."""


class ShapeMismatch(CompactqnError, ValueError):
    """Tensor or factor shapes are inconsistent."""


class OddDimension(CompactqnError, ValueError):
    """The problem dimension must be even."""
