"""Exception hierarchy shared by all modules."""


class StCopulaError(Exception):
    """Base class for errors raised by this package."""


class DomainError(StCopulaError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class FactorizationError(StCopulaError, ValueError):
    """Cholesky factorization failed at a given pivot."""

    def __init__(self, pivot, value):
        self.pivot = pivot
        self.value = value
        super().__init__(f"matrix is not positive definite: pivot {pivot} is {value:.3g}")


class FitError(StCopulaError, RuntimeError):
    """A model could not be estimated from the given data."""


class NumericError(StCopulaError, ArithmeticError):
    """An iterative numerical routine did not converge."""


class SelectionError(FitError):
    """No candidate copula family could be fitted."""


class StateError(StCopulaError, RuntimeError):
    """An object was used before it was ready (e.g. an unfitted model)."""


class TrainingError(StCopulaError, RuntimeError):
    """Neural network training diverged."""
