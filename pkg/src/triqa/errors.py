"""Exception types raised across the package.

All triqa-specific failures derive from :class:`TriqaError` so callers can
catch the whole family with one clause. Most are also ``ValueError``
subclasses because they signal bad arguments rather than environmental
failures.
"""


class TriqaError(Exception):
    """Base class for all triqa errors."""


class DecodeError(TriqaError, ValueError):
    """Raised when an image byte stream is malformed or truncated."""


class UnsupportedFormat(TriqaError, ValueError):
    """Raised for image containers other than PNG or JPEG."""


class InvalidDimension(TriqaError, ValueError):
    """Raised when a requested output dimension is zero or negative."""


class OutOfBounds(TriqaError, ValueError):
    """Raised when a crop rectangle exceeds the image bounds."""


class ImageTooSmall(TriqaError, ValueError):
    """Raised when an image cannot contain the requested view."""


class InvalidGrid(TriqaError, ValueError):
    """Raised when a grid count is < 1 or exceeds an image dimension."""


class CellTooSmall(TriqaError, ValueError):
    """Raised when a grid cell cannot contain a mini-patch."""


class ShapeMismatch(TriqaError, ValueError):
    """Raised when a tensor does not have the expected shape."""


class LengthMismatch(TriqaError, ValueError):
    """Raised when feature vectors of unequal length are combined."""


class DegenerateBatch(TriqaError, ValueError):
    """Raised when a batch is too small to form at least one pair."""


class DomainError(TriqaError, ValueError):
    """Raised when a probability argument falls outside its open interval."""


class UndefinedCorrelation(TriqaError, ValueError):
    """Raised when a correlation is undefined (constant input vector)."""


class ParseError(TriqaError, ValueError):
    """Raised on malformed label files or config files; carries a location."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MissingFile(TriqaError, FileNotFoundError):
    """Raised when referenced image files do not exist on disk."""


class RangeError(TriqaError, ValueError):
    """Raised when a label falls outside the declared score range."""


class NonFiniteLoss(TriqaError, ArithmeticError):
    """Raised when training produces a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: int | None = None, batch_index: int | None = None):
        self.epoch = epoch
        self.batch_index = batch_index
        super().__init__(message)


class InvalidConfig(TriqaError, ValueError):
    """Raised for unknown config keys, bad values, or violated invariants."""


class CheckpointError(TriqaError, ValueError):
    """Raised when a checkpoint file is unreadable or inconsistent."""
