"""Exception types shared across the package."""


class SparseVarError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SparseVarError, ValueError):
    """Malformed or out-of-contract input (shapes, orders, non-finite data)."""


class StabilityError(SparseVarError):
    """Coefficients describe an unstable (or insufficiently stable) process."""


class GenerationError(SparseVarError):
    """Random system generation failed (e.g. too many stability rejections)."""


class SingularDesignError(SparseVarError):
    """A regression design is singular or too ill-conditioned to solve."""


class ConvergenceError(SparseVarError):
    """An iterative solver exceeded its iteration cap before converging."""


class DegenerateDesignError(SparseVarError):
    """A variance or scaling denominator is numerically zero."""


class InvalidCorrelationError(SparseVarError):
    """A matrix that should be a correlation matrix is not one."""


class UndefinedRocError(SparseVarError):
    """ROC analysis is undefined (truth has no positives or no negatives)."""


class NumericError(SparseVarError):
    """A numerical routine (e.g. an eigensolver) failed to converge."""


class ConfigError(InvalidInputError):
    """A configuration file could not be parsed or validated."""
