"""Exception and warning types shared across the package."""


class EpBlockadeError(Exception):
    """Base class for package errors."""


class ConfigError(EpBlockadeError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class DimensionCapError(EpBlockadeError, ValueError):
    pass


class BasisMismatch(EpBlockadeError, ValueError):
    pass


class HermitianityViolation(EpBlockadeError, ValueError):
    pass


class NonConvergence(EpBlockadeError, RuntimeError):
    """Raised by iterative solvers; carries the last residual when known."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class StepUnstable(EpBlockadeError, RuntimeError):
    pass


class TrackingLost(EpBlockadeError, RuntimeError):
    def __init__(self, message, beta=None):
        self.beta = beta
        super().__init__(message)


class UnknownFigure(EpBlockadeError, KeyError):
    pass


class PoleProximity(RuntimeWarning):
    """Emitted when a closed-form denominator is nearly zero."""
