"""Exception hierarchy shared across the package."""


class DrnnError(Exception):
    """Base class for all package errors."""


class ParseError(DrnnError):
    """Malformed panel/tensor text input (ragged rows, bad cells)."""


class IoError(DrnnError):
    """Filesystem failure or unwritable/degenerate output."""


class ConfigError(DrnnError):
    """Invalid configuration value or inconsistent dimensions."""


class InvalidArgument(DrnnError):
    """Argument violates an operation precondition (e.g. i == j)."""


class NoDataError(DrnnError):
    """Panel or tensor carries no observed entries at all."""


class InsufficientData(DrnnError):
    """Too few observed cells for holdout-based estimation."""


class DegenerateInterval(DrnnError):
    """A zero observation count makes the interval undefined."""
