"""Exception hierarchy shared by every module."""


class PacingError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PacingError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NegativeField(ValidationError):
    pass


class BadCategory(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class EmptyDataset(PacingError, ValueError):
    pass


class HorizonExceedsData(PacingError, ValueError):
    pass


class OutsideSimplex(PacingError, ValueError):
    pass


class BadScenario(PacingError, ValueError):
    pass


class InstanceTooLarge(PacingError, ValueError):
    pass


class LengthMismatch(PacingError, ValueError):
    pass


class ConfigError(PacingError):
    """Invalid experiment configuration (CLI exit code 1)."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class InvariantBreach(PacingError):
    """A runtime invariant (e.g. budget safety) was violated (CLI exit code 3)."""
