"""Exception hierarchy shared by every module."""
from typing import Optional, Sequence


class MMTGError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MMTGError, ValueError):
    """Raised when tensor or array shapes are incompatible."""

    def __init__(self, message: str, *shapes: Sequence[int]):
        if shapes:
            rendered = " vs ".join(str(tuple(s)) for s in shapes)
            message = f"{message}: {rendered}"
        super().__init__(message)
        self.shapes = [tuple(s) for s in shapes]


class ValidationError(MMTGError, ValueError):
    """Raised when a value, record or configuration is invalid."""


class ParseException(MMTGError):
    """Raised when a dataset line cannot be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SamplingError(MMTGError):
    """Raised when a distractor pool cannot supply enough negatives."""


class UnknownConceptError(MMTGError, KeyError):
    """Raised on lookup of a concept id the embedding provider does not know."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown concept"


class CheckpointError(MMTGError):
    """Raised when a checkpoint is unreadable or does not fit the model."""


class DivergenceError(MMTGError, RuntimeError):
    """Raised when training produces a non-finite loss."""
