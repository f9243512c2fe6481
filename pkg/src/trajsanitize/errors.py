"""Exception types raised by the sanitization pipeline."""


class SanitizeError(Exception):
    """Base class for all pipeline errors."""


class ParseError(SanitizeError):
    """A malformed input line in strict mode."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ConfigError(SanitizeError):
    """Invalid parameters or mismatched pipeline inputs."""


class UndefinedStatisticsError(SanitizeError):
    """Probabilities requested from statistics over zero users."""


class EmptyDomainError(SanitizeError):
    """A randomized response over an empty output domain."""


class SupportMismatchError(SanitizeError):
    """Two distributions defined over different supports."""
