"""Exception hierarchy shared across the package."""


class EntropicKDEError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(EntropicKDEError, ValueError):
    """An argument is outside its valid domain."""


class InsufficientDataError(ParameterError):
    """A series, cloud or window list is too short for the requested operation."""


class ValidationError(EntropicKDEError, ValueError):
    """Input data violates a type invariant (non-finite samples, empty files...)."""


class ParseError(ValidationError):
    """A record file could not be parsed."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class DivergenceError(EntropicKDEError, ArithmeticError):
    """Numerical integration produced a non-finite state."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class DegenerateScaleWarning(UserWarning):
    """Emitted when a robust scale estimate (MAD) is zero."""
