"""Binary mask geometry: RLE codec, contouring, containment, layout types.

Masks are 2D boolean numpy arrays of shape (height, width), row-major.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, LengthMismatchError

Mask = np.ndarray  # bool, (h, w)


def _check_mask(mask: Mask) -> Mask:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise DimensionMismatchError(f"mask must be 2D and nonempty, got shape {mask.shape}")
    return mask


def decode_rle(runs: list[int], width: int, height: int) -> Mask:
    """Decode uncompressed row-major RLE (zero-run first) into a boolean mask.

    The first element may be 0 for masks that start with a foreground pixel.
    """
    runs = list(runs)
    if any(r < 0 for r in runs):
        raise LengthMismatchError("run lengths must be nonnegative")
    total = sum(runs)
    if total != width * height:
        raise LengthMismatchError(f"runs cover {total} pixels, expected {width * height}")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)


def encode_rle(mask: Mask) -> list[int]:
    """Inverse of decode_rle: row-major run lengths, zero-run first."""
    flat = _check_mask(mask).ravel()
    runs: list[int] = []
    value = False
    count = 0
    for bit in flat:
        if bit == value:
            count += 1
        else:
            runs.append(count)
            value = bit
            count = 1
    runs.append(count)
    return runs


def contour(mask: Mask) -> Mask:
    """Inner 1-pixel boundary: set where the mask is set and some 4-neighbor
    is background or outside the image. Always a subset of the input."""
    mask = _check_mask(mask)
    padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def contains(outer: Mask, inner: Mask, strict: bool = False) -> bool:
    """True iff every set pixel of inner is set in outer.

    With strict=True, additionally requires inner to have strictly
    smaller area than outer.
    """
    outer = _check_mask(outer)
    inner = _check_mask(inner)
    if outer.shape != inner.shape:
        raise DimensionMismatchError(f"shapes differ: {outer.shape} vs {inner.shape}")
    if not bool(np.all(outer | ~inner)):
        return False
    if strict and int(inner.sum()) >= int(outer.sum()):
        return False
    return True


def area_fraction(mask: Mask) -> float:
    """Fraction of image pixels covered by the mask, in [0, 1]."""
    mask = _check_mask(mask)
    return float(mask.sum()) / mask.size


@dataclass(frozen=True)
class EntitySpec:
    """One entity: unique id, nonempty regional caption, binary mask."""

    id: int
    caption: str
    mask: Mask

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"entity id must be positive, got {self.id}")
        if not self.caption:
            raise ValueError(f"entity {self.id}: caption must be nonempty")
        object.__setattr__(self, "mask", _check_mask(self.mask))


@dataclass(frozen=True)
class LayoutInstruction:
    """Global caption plus N entities with masks, all on one image canvas."""

    image_width: int
    image_height: int
    global_caption: str
    entities: tuple[EntitySpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be >= 1")
        object.__setattr__(self, "entities", tuple(self.entities))
        ids = [e.id for e in self.entities]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError(f"entity ids must be strictly increasing, got {ids}")
        for e in self.entities:
            if e.mask.shape != (self.image_height, self.image_width):
                raise DimensionMismatchError(
                    f"entity {e.id} mask shape {e.mask.shape} does not match "
                    f"image ({self.image_height}, {self.image_width})"
                )


def merge_contours(instruction: LayoutInstruction) -> Mask:
    """Pointwise max of every entity's contour; all-zero when N = 0."""
    merged = np.zeros((instruction.image_height, instruction.image_width), dtype=bool)
    for entity in instruction.entities:
        merged |= contour(entity.mask)
    return merged


def to_rgb(gray: Mask) -> np.ndarray:
    """Duplicate a {0,1} map into a 3-channel uint8 image with values {0,255}."""
    gray = _check_mask(gray)
    channel = gray.astype(np.uint8) * 255
    return np.stack([channel, channel, channel], axis=-1)
