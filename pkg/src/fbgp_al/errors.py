"""Exception types raised across the package."""


class FBGPError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FBGPError, ValueError):
    """Shapes, domains or names that violate an operation's preconditions."""


class NumericalError(FBGPError, ArithmeticError):
    """Cholesky factorization failed even at the largest jitter level."""

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class SamplerFailure(FBGPError, RuntimeError):
    """Every MCMC chain diverged on more than half of its transitions."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigError(FBGPError, ValueError):
    """Malformed campaign configuration or unknown registry names."""
