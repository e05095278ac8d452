"""Exception types shared across the package."""


class SadvaeError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SadvaeError):
    """A binary or text artifact does not match its declared format."""


class TruncatedFileError(FormatError):
    """A binary payload is shorter than its header declares."""


class DataError(SadvaeError):
    """Values violate a data invariant (non-finite entries, bad labels)."""


class ShapeError(SadvaeError):
    """Array widths or shapes are inconsistent with the operation."""


class ArgumentError(SadvaeError):
    """An argument is outside the operation's documented domain."""
