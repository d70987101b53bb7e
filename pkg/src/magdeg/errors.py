"""Exception types raised across the package."""


class MagdegError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MagdegError, ValueError):
    pass


class OutOfDomainError(MagdegError, ValueError):
    pass


class SolverFailureError(MagdegError, RuntimeError):
    """Linear solve did not reach its tolerance."""

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class NumericalFailureError(MagdegError, FloatingPointError):
    """NaN or inf detected in a field."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class RootNotFoundError(MagdegError, RuntimeError):
    pass


class ConfigError(MagdegError, ValueError):
    """Config parse/validation failure; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class InvariantViolation(MagdegError, AssertionError):
    """Raised by the driver's ``check`` mode when a per-step invariant breaks."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
