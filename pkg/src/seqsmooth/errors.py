"""Exception and warning types shared across the package."""


class EmptyEstimatorError(RuntimeError):
    """Raised when an estimator is queried before it has seen any data."""


class OutOfGridError(ValueError):
    """Raised when an evaluation point lies outside the estimator's grid."""


class LowMassError(ValueError):
    """Raised when the local kernel mass is too small to form an estimate."""


class KernelConstructionError(ValueError):
    """Raised when a higher-order kernel cannot be built from its base."""


class SelectionError(RuntimeError):
    """Raised when no bandwidth candidate yields a usable fit."""


class ConvergenceWarning(UserWarning):
    """Inner backfitting loop hit ``max_iter`` without converging."""


class QualityWarning(UserWarning):
    """Some values were replaced by a fallback during evaluation."""
