"""Exception types shared across the package."""


class MfmsError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MfmsError, ValueError):
    pass


class NumericFailureError(MfmsError, ArithmeticError):
    """Raised when a factorization fails even after jitter escalation."""

    def __init__(self, message, jitters=()):
        super().__init__(message)
        self.jitters = tuple(jitters)


class BudgetExhaustedError(MfmsError):
    pass


class ResourceLimitError(MfmsError):
    pass


class ParseError(MfmsError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(MfmsError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class ConfigError(MfmsError, ValueError):
    pass


class SimulatorError(MfmsError):
    """Wraps a backend failure together with the configuration that caused it."""

    def __init__(self, message, config=None):
        super().__init__(message)
        self.config = config
