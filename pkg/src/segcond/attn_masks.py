"""Boolean attention masks over the joint token sequence.

Two kinds exist: the semantic-alignment mask (SAA), which binds each
entity's text to its image region while keeping image-image attention
dense, and the stricter attribute-isolation mask (AIA), which confines
each entity's image tokens to themselves on a configurable band of
middle layers.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import RangeError
from .tokens import TokenLayout

# 57-layer reference architecture with isolation on middle layers [20, 38).
DEFAULT_TOTAL_LAYERS = 57
DEFAULT_AIA_START = 20
DEFAULT_AIA_END = 38


class MaskKind(str, Enum):
    SAA = "saa"
    AIA = "aia"


@dataclass(frozen=True)
class AttentionMask:
    """S x S boolean matrix; allowed[q, k] = 1 means query q may attend key k."""

    size: int
    allowed: np.ndarray

    def __post_init__(self):
        if self.allowed.shape != (self.size, self.size):
            raise ValueError(f"allowed must be ({self.size}, {self.size})")


@dataclass(frozen=True)
class ValidationReport:
    """Rows (query indices) with no allowed key. Empty means the mask is safe
    to feed to softmax attention."""

    unreachable: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.unreachable


def _group_vectors(layout: TokenLayout) -> tuple[np.ndarray, np.ndarray]:
    """Per-token group id (entity index, 0 = global/background) and a
    text/image segment flag."""
    size = layout.size
    group = np.zeros(size, dtype=np.int64)
    is_text = np.zeros(size, dtype=bool)
    for i, idx in enumerate(layout.text_sets):
        group[idx] = i
        is_text[idx] = True
    for i, idx in enumerate(layout.image_sets):
        group[idx] = i
    return group, is_text


def build_saa(layout: TokenLayout) -> AttentionMask:
    """Semantic-alignment mask. Allowed pairs, for some entity index i:

    - q, k in the same text set T_i
    - q in T_i or T_0, k in I_i
    - q in I_i, k in T_i or T_0
    - q, k both image tokens
    """
    group, is_text = _group_vectors(layout)
    gq, gk = group[:, None], group[None, :]
    tq, tk = is_text[:, None], is_text[None, :]
    same = gq == gk
    allowed = (
        (tq & tk & same)
        | (tq & ~tk & (same | (gq == 0)))
        | (~tq & tk & (same | (gk == 0)))
        | (~tq & ~tk)
    )
    return AttentionMask(size=layout.size, allowed=allowed)


def build_aia(layout: TokenLayout) -> AttentionMask:
    """Attribute-isolation mask. Allowed pairs, for some entity index i:

    - q, k in the same text set T_i
    - q in T_i, k in I_i (and symmetrically I_i -> T_i)
    - q in I_i or I_0, k in I_i

    Cross-entity image attention is therefore forbidden; background image
    queries still reach every image token.
    """
    group, is_text = _group_vectors(layout)
    gq, gk = group[:, None], group[None, :]
    tq, tk = is_text[:, None], is_text[None, :]
    same = gq == gk
    allowed = (
        (tq & tk & same)
        | (tq & ~tk & same)
        | (~tq & tk & same)
        | (~tq & ~tk & (same | (gq == 0)))
    )
    return AttentionMask(size=layout.size, allowed=allowed)


def extend_with_condition(mask: AttentionMask, n_cond: int) -> AttentionMask:
    """Append n_cond condition tokens with unrestricted boolean attention.

    Strength control on the image<->condition blocks is additive (log gamma
    bias), not boolean, so the extension is all-ones.
    """
    if n_cond < 0:
        raise ValueError(f"n_cond must be >= 0, got {n_cond}")
    if n_cond == 0:
        return mask
    size = mask.size + n_cond
    allowed = np.ones((size, size), dtype=bool)
    allowed[:mask.size, :mask.size] = mask.allowed
    return AttentionMask(size=size, allowed=allowed)


@dataclass(frozen=True)
class LayerSchedule:
    """Which mask kind applies at each transformer layer."""

    kinds: tuple[MaskKind, ...]

    @property
    def total_layers(self) -> int:
        return len(self.kinds)


def make_schedule(total_layers: int,
                  aia_start: int = DEFAULT_AIA_START,
                  aia_end: int = DEFAULT_AIA_END) -> LayerSchedule:
    """AIA on the half-open layer range [aia_start, aia_end), SAA elsewhere."""
    if not (0 <= aia_start <= aia_end <= total_layers):
        raise RangeError(
            f"need 0 <= {aia_start} <= {aia_end} <= {total_layers}"
        )
    kinds = tuple(
        MaskKind.AIA if aia_start <= i < aia_end else MaskKind.SAA
        for i in range(total_layers)
    )
    return LayerSchedule(kinds=kinds)


def scaled_schedule(total_layers: int,
                    ref_total: int = DEFAULT_TOTAL_LAYERS,
                    ref_start: int = DEFAULT_AIA_START,
                    ref_end: int = DEFAULT_AIA_END) -> LayerSchedule:
    """Schedule for a smaller stack, AIA band scaled proportionally from the
    reference architecture."""
    start = round(ref_start * total_layers / ref_total)
    end = round(ref_end * total_layers / ref_total)
    return make_schedule(total_layers, start, end)


def check_reachability(mask: AttentionMask) -> ValidationReport:
    """Report every query row with zero allowed keys."""
    bad = np.flatnonzero(~mask.allowed.any(axis=1))
    return ValidationReport(unreachable=tuple(int(i) for i in bad))
