"""Condition tokens from the contour image: patch encoding, zero-token
filtering, and the log-gamma attention bias."""
from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from .errors import GammaOutOfRangeError

# Loose "scribble" control preset for the guidance strength.
SCRIBBLE_GAMMA = 0.2


@dataclass(frozen=True)
class ConditionTokens:
    """Condition token vectors plus their token-grid positions.

    kept_indices index into the pre-filter raster-order grid, so position
    identity survives filtering.
    """

    tokens: np.ndarray            # (n, d) float
    source_positions: np.ndarray  # (n, 2) int
    kept_indices: np.ndarray      # (n,) int

    def __post_init__(self):
        n = self.tokens.shape[0]
        if self.source_positions.shape != (n, 2) or self.kept_indices.shape != (n,):
            raise ValueError("tokens, source_positions, kept_indices lengths differ")

    def __len__(self) -> int:
        return self.tokens.shape[0]


def encode_contour(img: np.ndarray, f: int, d: int) -> ConditionTokens:
    """Deterministic stand-in encoder: one token per f x f patch in raster
    order, the patch's single-channel pixels (scaled to [0,1]) flattened into
    the first f*f coordinates, the rest zero.

    An all-zero patch maps to an exactly-zero token, which is what makes the
    downstream drop criterion well-defined.
    """
    if f < 1:
        raise ValueError(f"patch size must be >= 1, got {f}")
    if d < f * f:
        raise ValueError(f"embedding dim {d} too small for {f}x{f} patches")
    img = np.asarray(img)
    gray = img[..., 0] if img.ndim == 3 else img
    gray = gray.astype(np.float64) / 255.0
    h, w = gray.shape
    rows = -(-h // f)
    cols = -(-w // f)
    n = rows * cols
    tokens = np.zeros((n, d), dtype=np.float64)
    positions = np.zeros((n, 2), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            patch = np.zeros((f, f), dtype=np.float64)
            block = gray[r * f:(r + 1) * f, c * f:(c + 1) * f]
            patch[:block.shape[0], :block.shape[1]] = block
            i = r * cols + c
            tokens[i, :f * f] = patch.ravel()
            positions[i] = (r, c)
    return ConditionTokens(
        tokens=tokens,
        source_positions=positions,
        kept_indices=np.arange(n, dtype=np.int64),
    )


def filter_tokens(cond: ConditionTokens, threshold: float = 0.0) -> ConditionTokens:
    """Drop tokens carrying no shape information.

    The default keeps exactly the tokens with any nonzero coordinate; a
    positive threshold relaxes that to max|coordinate| > threshold.
    """
    keep = np.abs(cond.tokens).max(axis=1) > threshold if len(cond) else np.zeros(0, dtype=bool)
    return ConditionTokens(
        tokens=cond.tokens[keep],
        source_positions=cond.source_positions[keep],
        kept_indices=cond.kept_indices[keep],
    )


@dataclass(frozen=True)
class BiasMatrix:
    """Additive attention bias over the [text | image | condition] sequence:
    log(gamma) on the image<->condition blocks, zero elsewhere."""

    values: np.ndarray
    gamma: float


def build_bias(L_text: int, L_img: int, L_cond: int, gamma: float) -> BiasMatrix:
    """Bias for a sequence of L_text + L_img + L_cond tokens.

    gamma = 1 is strict shape adherence (zero bias); gamma -> 0 suppresses
    condition influence. L_cond may be anything >= 0 (post-filter count).
    """
    if not (0.0 < gamma <= 1.0):
        raise GammaOutOfRangeError(f"gamma must be in (0, 1], got {gamma}")
    size = L_text + L_img + L_cond
    values = np.zeros((size, size), dtype=np.float64)
    img = slice(L_text, L_text + L_img)
    cnd = slice(L_text + L_img, size)
    values[img, cnd] = log(gamma)
    values[cnd, img] = log(gamma)
    return BiasMatrix(values=values, gamma=gamma)
