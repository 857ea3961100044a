"""Exception types shared across modules."""


class PhaseRetrievalError(Exception):
    pass


class DomainError(PhaseRetrievalError, ValueError):
    """Input outside the supported domain of an operation."""


class EvaluationError(PhaseRetrievalError, ArithmeticError):
    """A function could not be evaluated at the requested point."""


class SolverError(PhaseRetrievalError, RuntimeError):
    """An iterative solver failed; ``residual`` reports how far it got."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AccuracyError(PhaseRetrievalError, ArithmeticError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class UnboundedThresholdError(SolverError):
    pass


class UnsupportedOperationError(PhaseRetrievalError, NotImplementedError):
    """The operation is not defined for the given model."""
