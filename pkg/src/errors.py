"""
Exception hierarchy shared by every VARC module.

The three families map onto the CLI exit codes: ConfigError -> 1,
DataError -> 2, anything else -> 3.
"""
from typing import Any, Optional


class VarcError(Exception):
    """Base class for all VARC errors."""


class ConfigError(VarcError):
    """Invalid configuration key or value."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class DataError(VarcError):
    """Malformed or missing task data."""


# --- arc-data ---------------------------------------------------------------

class EmptyGrid(DataError):
    pass


class RaggedRows(DataError):
    pass


class ColorOutOfRange(DataError):
    pass


class GridTooLarge(DataError):
    pass


class MissingField(DataError):
    pass


class EmptyTaskSet(DataError):
    pass


class DuplicateTaskId(DataError):
    pass


class TaskFileError(DataError):
    """A parse error raised while reading a specific task file."""

    def __init__(self, path: str, cause: Exception):
        super().__init__(f"{path}: {type(cause).__name__}: {cause}")
        self.path = path
        self.cause = cause


# --- canvas-geometry --------------------------------------------------------

class ScaleOverflow(VarcError):
    pass


class PlacementOverflow(VarcError):
    pass


class NoFeasibleView(VarcError):
    pass


# --- nn-core / vit ----------------------------------------------------------

class ShapeMismatch(VarcError):
    pass


class EmptyMask(VarcError):
    pass


class StepOutOfRange(VarcError):
    pass


class TaskIndexOutOfRange(VarcError):
    pass


# --- inference / checkpoints ------------------------------------------------

class AllViewsFailed(VarcError):
    """Every view of a multi-view inference failed to decode."""

    def __init__(self, tally: Any):
        super().__init__(f"all {tally.total_views} views failed to decode")
        self.tally = tally


class CheckpointFormatError(VarcError):
    pass
