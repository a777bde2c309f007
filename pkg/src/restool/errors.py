"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
DegenerateError -> 4.
"""


class RestoolError(Exception):
    """Base class for all restool errors."""


class ConfigError(RestoolError):
    """Invalid pipeline configuration (schema violation, bad field value)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DataError(RestoolError):
    """Malformed or inconsistent input data."""


class DegenerateError(RestoolError):
    """Numerically degenerate input (zero range, zero variance, all-zero weights...)."""
