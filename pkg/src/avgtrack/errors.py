"""Exception types shared by every module in the package."""


class AvgTrackError(Exception):
    """Base class for all package-specific failures."""


class SingularMatrix(AvgTrackError):
    """A factorization hit a pivot too small to trust."""


class NotPositiveDefinite(AvgTrackError):
    """A matrix required to be positive definite is not."""


class NoConvergence(AvgTrackError):
    """An iterative routine ran out of iterations before reaching tolerance."""


class DimensionMismatch(AvgTrackError):
    """Operands have incompatible shapes for the requested operation."""


class AssumptionTwoViolated(AvgTrackError):
    """The steady-state block matrix [[A - I, B], [C, 0]] is singular."""


class UnstableGain(AvgTrackError):
    """A feedback gain does not place the closed loop inside the unit circle."""


class NonFinite(AvgTrackError):
    """A simulation produced NaN or infinite values (diverging closed loop)."""


class SolverFailure(AvgTrackError):
    """The QP solver stopped before reaching the requested tolerance."""
