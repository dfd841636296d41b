"""Domain errors shared by all services"""
from typing import Iterable

from pydantic import ValidationError


class ToolkitError(Exception):
    """Base class for every error raised on bad input"""
    pass


class FormatError(ToolkitError):
    """Raised when a file does not match its declared format"""
    pass


class RangeError(ToolkitError):
    """Raised when a stored value falls outside its allowed range"""
    pass


class ArgumentError(ToolkitError):
    """Raised when an operation is called with invalid arguments"""
    pass


class GeometryError(ToolkitError):
    """Raised when a polygon is self-intersecting or degenerate"""
    pass


class IoError(ToolkitError):
    """Raised when a file cannot be read or written"""
    pass


class EmptyGroundTruthError(ArgumentError):
    """Raised when an evaluation has no ground-truth objects at all"""
    pass


def describe_validation_error(exc: ValidationError) -> str:
    """Flatten a pydantic ValidationError into 'field -> path: message' lines"""
    details: Iterable[str] = (
        f"{' -> '.join(str(loc) for loc in error['loc']) or '<root>'}: {error['msg']}"
        for error in exc.errors()
    )
    return "; ".join(details)
