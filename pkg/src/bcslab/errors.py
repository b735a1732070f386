"""Exception hierarchy shared by all bcslab modules."""


class BCSLabError(Exception):
    """Base class. ``module`` names the failing component."""

    module = "bcslab"

    def __init__(self, message, *, module=None, residual=None):
        super().__init__(message)
        if module is not None:
            self.module = module
        self.residual = residual


class InvalidParameterError(BCSLabError, ValueError):
    """Non-finite or otherwise malformed input."""


class DomainError(BCSLabError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. a >= 0)."""


class AccuracyError(BCSLabError, ArithmeticError):
    """A numerical tolerance could not be met; ``residual`` holds the estimate."""


class ConvergenceError(AccuracyError):
    """Iteration limit reached before the residual dropped below tolerance."""


class NumericalError(BCSLabError, ArithmeticError):
    """NaN/inf produced or a linear-algebra routine failed."""


class ConfigError(BCSLabError, ValueError):
    """Malformed configuration, unknown keys, or inconsistent discretization."""
