"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): bad input
(`ParameterError` and friends, exit code 2) and numerical failure
(`NumericalError` and friends, exit code 3).
"""


class GaussDelayError(Exception):
    """Base class for all package errors."""


class ParameterError(GaussDelayError, ValueError):
    """Invalid argument or inconsistent inputs."""


class DomainError(ParameterError):
    """Evaluation requested outside the domain of a function."""


class ConfigError(ParameterError):
    """Malformed or incomplete run configuration."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(GaussDelayError, ArithmeticError):
    """A computation could not be carried out reliably."""


class StepSizeError(NumericalError):
    """The implicit step matrix (I - dt*B) is singular or nearly so."""


class RankError(NumericalError):
    """The diffusion matrix is rank deficient."""


class ConditioningError(NumericalError):
    """A covariance matrix is too ill-conditioned to invert."""


class InfeasibleScanError(NumericalError):
    """Every candidate exit time was excluded by the conditioning filter."""


class ConvergenceError(NumericalError):
    """An iterative method failed to converge."""
