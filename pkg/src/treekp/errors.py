"""Exception types raised by the pipeline stages."""

from __future__ import annotations


class TreeKPError(Exception):
    """Base class for all library errors."""


class DimensionError(TreeKPError, ValueError):
    pass


class DegenerateInputError(TreeKPError, ValueError):
    pass


class EmptyInputError(TreeKPError, ValueError):
    pass


class ShapeError(TreeKPError, ValueError):
    pass


class StructureError(TreeKPError, ValueError):
    """Invalid parent links in a key-point list or graph file."""


class InsufficientDataError(TreeKPError, ValueError):
    pass


class SegmentationError(TreeKPError):
    pass


class NoSeedsError(TreeKPError):
    pass


class TruncationError(TreeKPError):
    """The trace hit ``max_steps``. Carries the partial result."""

    def __init__(self, message, keypoints, stats):
        super().__init__(message)
        self.keypoints = keypoints
        self.stats = stats


class ConflictError(TreeKPError):
    pass


class StageError(TreeKPError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
