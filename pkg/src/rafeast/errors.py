"""Exception types raised across the package."""


class RAFeastError(Exception):
    """Base class for all errors raised by rafeast."""


class IndexOutOfRange(RAFeastError, IndexError):
    pass


class AsymmetricInput(RAFeastError, ValueError):
    pass


class NonFiniteValue(RAFeastError, ValueError):
    pass


class DimensionMismatch(RAFeastError, ValueError):
    pass


class ParseError(RAFeastError, ValueError):
    pass


class UnsupportedKind(RAFeastError, ValueError):
    pass


class SingularShift(RAFeastError, ArithmeticError):
    """The shift sits (numerically) on the spectrum of the matrix."""


class InvalidNodeCount(RAFeastError, ValueError):
    pass


class InvalidSpectrum(RAFeastError, ValueError):
    pass


class InvalidOversampling(RAFeastError, ValueError):
    pass


class DegenerateGap(RAFeastError, ValueError):
    """No finite answer exists because the relevant eigengap is zero."""


class RankDeficientSketch(RAFeastError, ArithmeticError):
    pass


class EmptySelection(RAFeastError, ValueError):
    """No Ritz value fell inside the search window."""


class NotConverged(RAFeastError, RuntimeError):
    pass


class InsufficientTrace(RAFeastError, ValueError):
    pass


class NotSymmetric(RAFeastError, ValueError):
    pass


class NoConvergence(RAFeastError, ArithmeticError):
    pass


class TooLargeForOracle(RAFeastError, ValueError):
    pass


class LengthMismatch(RAFeastError, ValueError):
    pass


class ConfigError(RAFeastError, ValueError):
    pass
