"""Shared fixtures and independent oracles used across the suite."""
from __future__ import annotations

import numpy as np
import pytest

from segcond.masks import EntitySpec, LayoutInstruction
from segcond.tokens import TokenLayout, build_token_layout


def make_instruction(width: int, height: int, masks: list[np.ndarray],
                     global_caption: str = "a scene") -> LayoutInstruction:
    entities = tuple(
        EntitySpec(id=i + 1, caption=f"entity {i + 1}", mask=m)
        for i, m in enumerate(masks)
    )
    return LayoutInstruction(image_width=width, image_height=height,
                             global_caption=global_caption, entities=entities)


def centered_2x2_in_4x4() -> np.ndarray:
    m = np.zeros((4, 4), dtype=bool)
    m[1:3, 1:3] = True
    return m


def random_layout(rng: np.random.Generator, max_entities: int = 5,
                  max_grid: int = 8, max_caption: int = 6) -> TokenLayout:
    """Random token layout: N entities, a label grid (ids may be absent so
    empty image sets occur), and random caption lengths."""
    n = int(rng.integers(0, max_entities + 1))
    rows = int(rng.integers(1, max_grid + 1))
    cols = int(rng.integers(1, max_grid + 1))
    grid = rng.integers(0, n + 1, size=(rows, cols))
    lengths = [int(rng.integers(1, max_caption + 1)) for _ in range(n + 1)]
    return build_token_layout(grid, lengths)


def saa_oracle(layout: TokenLayout) -> np.ndarray:
    """Literal case-list evaluation of the semantic-alignment predicate."""
    S = layout.size
    T = [set(s.tolist()) for s in layout.text_sets]
    I = [set(s.tolist()) for s in layout.image_sets]
    image_all = set().union(*I) if I else set()
    allowed = np.zeros((S, S), dtype=bool)
    for q in range(S):
        for k in range(S):
            if q in image_all and k in image_all:
                allowed[q, k] = True
                continue
            for i in range(len(T)):
                if q in T[i] and k in T[i]:
                    allowed[q, k] = True
                elif (q in T[i] or q in T[0]) and k in I[i]:
                    allowed[q, k] = True
                elif q in I[i] and (k in T[i] or k in T[0]):
                    allowed[q, k] = True
    return allowed


def aia_oracle(layout: TokenLayout) -> np.ndarray:
    """Literal case-list evaluation of the attribute-isolation predicate."""
    S = layout.size
    T = [set(s.tolist()) for s in layout.text_sets]
    I = [set(s.tolist()) for s in layout.image_sets]
    allowed = np.zeros((S, S), dtype=bool)
    for q in range(S):
        for k in range(S):
            for i in range(len(T)):
                if q in T[i] and k in T[i]:
                    allowed[q, k] = True
                elif q in T[i] and k in I[i]:
                    allowed[q, k] = True
                elif q in I[i] and k in T[i]:
                    allowed[q, k] = True
                elif (q in I[i] or q in I[0]) and k in I[i]:
                    allowed[q, k] = True
    return allowed


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
