"""Shared exception types and CLI exit codes."""


class ValidationError(ValueError):
    """Invalid input data (bad distribution, bad matrix, shape mismatch)."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class NumericError(RuntimeError):
    """Non-finite values encountered where finite ones are required."""


class IdxFormatError(ValueError):
    """Malformed IDX file; carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
