"""Exception types raised across the package."""


class PadeIntError(Exception):
    """Base class for every error raised by this package."""


class SingularMatrixError(PadeIntError):
    """A linear solve met a pivot below the singularity threshold.

    When raised while applying a rational approximant this means the
    denominator matrix is numerically singular, i.e. the step size is too
    large for the requested order.
    """


# A singular rational-approximant denominator is detected inside the linear
# solve, so it surfaces as the same exception type.
SingularDenominatorError = SingularMatrixError


class MatrixExpOverflowError(PadeIntError):
    """Input norm too large for the scaling-and-squaring exponential."""


class OddDimensionError(PadeIntError):
    """Symplectic-structure query on a matrix of odd dimension."""


class DegenerateStepError(PadeIntError):
    """Step size outside (0, 1), where the truncation bound is undefined."""


class QuadratureFailureError(PadeIntError):
    """Kernel evaluation failed at a quadrature node."""


class NotInfinitesimalSymplecticError(PadeIntError):
    """A generator matrix fails the infinitesimal-symplectic test."""

    def __init__(self, index: int, defect: float):
        self.index = index
        self.defect = defect
        super().__init__(
            f"generator {index} is not infinitesimal symplectic "
            f"(max |J B + B^T J| = {defect:.3e})"
        )


class NotSymmetricError(PadeIntError):
    """A matrix required to be symmetric is not."""


class NonCommutingGeneratorsError(PadeIntError):
    """Exact-solution stepping requested for non-commuting generators."""


class NonIntegralStepCountError(PadeIntError):
    """T/h is not an integer, so the grid cannot reach the final time."""


class DegenerateSeriesError(PadeIntError):
    """An error series cannot support a log-log order fit."""


class MissingDiagnosticsError(PadeIntError):
    """A trajectory lacks the recorded diagnostics needed by an operation."""


class SpecMismatchError(PadeIntError):
    """Supplied noise/joint data does not fit the scheme being stepped."""


class PathFailureError(PadeIntError):
    """A one-step map failed mid-trajectory.

    Carries the index of the failing step and the underlying cause.
    """

    def __init__(self, step_index: int, cause: Exception):
        self.step_index = step_index
        self.cause = cause
        super().__init__(f"step {step_index} failed: {cause}")


class ConfigError(PadeIntError):
    """Invalid experiment configuration (file or command line)."""
