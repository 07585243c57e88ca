"""Exception and warning types shared across the package."""


class SeqCtlError(Exception):
    """Base class for all package errors."""


class DomainError(SeqCtlError, ValueError):
    """An argument lies outside the domain of the function."""


class KinkError(DomainError):
    """A derivative was requested at a non-differentiable point of the penalty."""


class ConvergenceError(SeqCtlError, RuntimeError):
    """An iterative solver failed to converge."""


class ConfigError(SeqCtlError, ValueError):
    """Invalid configuration (simulation settings, CLI config files, ...)."""


class NotApplicable(SeqCtlError):
    """The requested quantity is undefined for this solution regime."""


class TruncationWarning(UserWarning):
    """A truncated series may not have converged."""
