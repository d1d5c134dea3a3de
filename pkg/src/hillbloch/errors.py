"""Exception types raised across the package."""


class HillBlochError(Exception):
    """Base class for every error this package raises on purpose."""


class NonHermitianInput(HillBlochError):
    pass


class NonSquare(HillBlochError):
    pass


class ConvergenceFailure(HillBlochError):
    pass


class DimensionMismatch(HillBlochError):
    pass


class SymmetryViolation(HillBlochError):
    pass


class NonHermitianSample(HillBlochError):
    pass


class InsufficientSamples(HillBlochError):
    pass


class UnknownLabel(HillBlochError, KeyError):
    pass


class AccuracyFailure(HillBlochError):
    pass


class SuspectedMissedRoot(HillBlochError):
    """Oracle root count disagrees with the Galerkin count in a bracket.

    Carries the partial result so callers can report instead of abort.
    """

    def __init__(self, message, roots=None, expected=None):
        super().__init__(message)
        self.roots = roots
        self.expected = expected


class IndexTooSmall(HillBlochError, ValueError):
    pass


class InvalidN(HillBlochError, ValueError):
    pass


class NonSimpleEigenvalue(HillBlochError):
    pass


class TInForbiddenSet(HillBlochError):
    pass


class CutoffTooHigh(HillBlochError, ValueError):
    pass


class ConfigError(HillBlochError, ValueError):
    pass
