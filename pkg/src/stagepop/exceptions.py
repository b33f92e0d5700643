"""Exception hierarchy shared by every solver in the package."""


class StagePopError(Exception):
    """Base class for all package errors."""


class ConfigurationError(StagePopError, ValueError):
    """Invalid grid, coefficient or scenario configuration."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


class ShapeError(StagePopError, ValueError):
    """Array shape does not match the grid."""


class PreconditionError(StagePopError, ValueError):
    """An operation was called outside its documented domain."""


class StepSizeError(StagePopError, ValueError):
    """Time step exceeds the explicit-part stability bound."""


class NumericalBlowupError(StagePopError, FloatingPointError):
    """Non-finite values appeared during time stepping."""


class PositivityError(StagePopError, ArithmeticError):
    """A density became negative. Always a scheme bug, never a model property."""


class BoundViolationError(StagePopError, ArithmeticError):
    """The a-priori sup-norm bound failed along a trajectory."""


class ConvergenceError(StagePopError, RuntimeError):
    """An iterative solver ran out of iterations.

    ``history`` carries the defect sequence and ``estimate`` the last iterate
    or eigenvalue estimate when one is available.
    """

    def __init__(self, message, history=None, estimate=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.estimate = estimate


class DegenerateAttractorError(ConvergenceError):
    """The period map converged to the trivial state (extinction regime)."""


class ExtinctionRegimeError(ConvergenceError):
    """A steady-state search collapsed to zero."""


class NumericalResolutionError(StagePopError, RuntimeError):
    """Observed dynamics contradict the sign of the principal eigenvalue."""


class InternalConsistencyError(StagePopError, AssertionError):
    """Two results that cannot both hold were produced."""
