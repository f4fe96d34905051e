"""Exception types shared across the package."""


class SegcondError(Exception):
    """Base class for all segcond errors."""


class LengthMismatchError(SegcondError):
    """Run-length data does not cover the declared pixel count."""


class DimensionMismatchError(SegcondError):
    """Two grids that must share dimensions do not."""


class UnknownEntityIdError(SegcondError):
    """A token grid references an entity id with no caption."""


class RangeError(SegcondError):
    """A layer range is outside the valid interval."""


class GammaOutOfRangeError(SegcondError):
    """Shape-guidance strength must lie in (0, 1]."""


class ShapeMismatchError(SegcondError):
    """Matrix shapes do not conform for the requested operation."""


class UnreachableQueryError(SegcondError):
    """An attention query row has no allowed key."""


class EmptySetError(SegcondError):
    """An aggregate was requested over an empty collection."""


class ManifestParseError(SegcondError):
    """A manifest file is malformed or violates the schema."""
