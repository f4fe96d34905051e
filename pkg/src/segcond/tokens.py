"""Pixel-to-token mapping: label maps, patch plurality downsampling,
token index sets and 2D positions for the joint sequence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownEntityIdError
from .masks import LayoutInstruction

# Default caption-token cap, matching common text-encoder budgets.
MAX_CAPTION_TOKENS = 77


def assign_labels(instruction: LayoutInstruction) -> np.ndarray:
    """Resolve overlapping masks into a single int label map (0 = background).

    A pixel claimed by several entities goes to the one with the smallest
    mask area; ties break toward the lower id. Order-independent.
    """
    h, w = instruction.image_height, instruction.image_width
    labels = np.zeros((h, w), dtype=np.int32)
    # Larger areas first so smaller (later) writes win; stable id tie-break
    # by writing higher ids before lower ones at equal area.
    order = sorted(instruction.entities, key=lambda e: (-int(e.mask.sum()), -e.id))
    for entity in order:
        labels[entity.mask] = entity.id
    return labels


def patchify_labels(labels: np.ndarray, f: int) -> np.ndarray:
    """Downsample a label map by factor f using per-patch plurality.

    Background (0) counts like any label; ties break toward the lower label.
    Edge patches are truncated.
    """
    if f < 1:
        raise ValueError(f"downsampling factor must be >= 1, got {f}")
    labels = np.asarray(labels)
    if f == 1:
        return labels.copy()
    h, w = labels.shape
    rows = -(-h // f)
    cols = -(-w // f)
    out = np.zeros((rows, cols), dtype=labels.dtype)
    for r in range(rows):
        for c in range(cols):
            patch = labels[r * f:(r + 1) * f, c * f:(c + 1) * f]
            values, counts = np.unique(patch, return_counts=True)
            # np.unique sorts values; argmax picks the first (lowest) on ties
            out[r, c] = values[np.argmax(counts)]
    return out


def patchify_to_grid(labels: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Plurality downsampling to an exact rows x cols grid using an even
    partition of the pixel axes. Same tie rule as patchify_labels."""
    labels = np.asarray(labels)
    h, w = labels.shape
    if rows < 1 or cols < 1 or rows > h or cols > w:
        raise ValueError(f"grid {rows}x{cols} invalid for {h}x{w} map")
    r_edges = np.linspace(0, h, rows + 1, dtype=np.int64)
    c_edges = np.linspace(0, w, cols + 1, dtype=np.int64)
    out = np.zeros((rows, cols), dtype=labels.dtype)
    for r in range(rows):
        for c in range(cols):
            patch = labels[r_edges[r]:r_edges[r + 1], c_edges[c]:c_edges[c + 1]]
            values, counts = np.unique(patch, return_counts=True)
            out[r, c] = values[np.argmax(counts)]
    return out


@dataclass(frozen=True)
class TokenLayout:
    """Partition of the joint sequence into text sets T_0..T_N and image
    sets I_0..I_N, plus a (row, col) position per token.

    Text tokens occupy [0, L_text); image tokens [L_text, L_text + L_img)
    in raster order. Text positions are all (0, 0).
    """

    text_sets: tuple[np.ndarray, ...]
    image_sets: tuple[np.ndarray, ...]
    positions: np.ndarray  # (L_text + L_img, 2) int
    L_text: int
    L_img: int

    @property
    def n_entities(self) -> int:
        return len(self.text_sets) - 1

    @property
    def size(self) -> int:
        return self.L_text + self.L_img

    def image_positions(self) -> np.ndarray:
        return self.positions[self.L_text:]


def build_token_layout(tokens: np.ndarray, caption_lengths: list[int]) -> TokenLayout:
    """Lay out the joint sequence from a token-grid label map and per-caption
    token counts [len(T_0), ..., len(T_N)]."""
    tokens = np.asarray(tokens)
    if any(n < 1 for n in caption_lengths):
        raise ValueError(f"caption lengths must be >= 1, got {caption_lengths}")
    n_entities = len(caption_lengths) - 1
    present = np.unique(tokens)
    unknown = [int(v) for v in present if v < 0 or v > n_entities]
    if unknown:
        raise UnknownEntityIdError(f"token grid references ids {unknown} with no caption")

    text_sets = []
    offset = 0
    for length in caption_lengths:
        text_sets.append(np.arange(offset, offset + length))
        offset += length
    L_text = offset

    rows, cols = tokens.shape
    L_img = rows * cols
    flat = tokens.ravel()
    image_sets = [L_text + np.flatnonzero(flat == i) for i in range(n_entities + 1)]

    positions = np.zeros((L_text + L_img, 2), dtype=np.int64)
    grid_r, grid_c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    positions[L_text:, 0] = grid_r.ravel()
    positions[L_text:, 1] = grid_c.ravel()

    return TokenLayout(
        text_sets=tuple(text_sets),
        image_sets=tuple(image_sets),
        positions=positions,
        L_text=L_text,
        L_img=L_img,
    )


def caption_token_counts(instruction: LayoutInstruction,
                         cap: int = MAX_CAPTION_TOKENS) -> list[int]:
    """Whitespace word counts for the global and per-entity captions,
    each clamped to [1, cap]. Stand-in for a real tokenizer."""
    captions = [instruction.global_caption] + [e.caption for e in instruction.entities]
    return [min(max(len(c.split()), 1), cap) for c in captions]
