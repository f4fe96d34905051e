"""Evaluators: class-agnostic mean IoU over paired mask sets, and an analytic
multiply-accumulate model for attention cost with and without condition-token
filtering."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatchError, EmptySetError
from .masks import Mask

# Benchmark text budget: one 512-token global prompt plus 5 regions x 50 tokens.
DEFAULT_L_TEXT = 512 + 5 * 50


def entity_iou(pred: Mask, ref: Mask) -> float:
    """Intersection over union of two same-size masks; 1.0 when both empty."""
    pred = np.asarray(pred, dtype=bool)
    ref = np.asarray(ref, dtype=bool)
    if pred.shape != ref.shape:
        raise DimensionMismatchError(f"shapes differ: {pred.shape} vs {ref.shape}")
    union = int((pred | ref).sum())
    if union == 0:
        return 1.0
    return int((pred & ref).sum()) / union


@dataclass(frozen=True)
class MaskPairSet:
    """Predicted/reference mask pairs keyed by entity id."""

    entries: tuple[tuple[int, Mask, Mask], ...]

    def __post_init__(self):
        ids = [i for i, _, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate entity ids in {ids}")


def class_agnostic_miou(pairs: MaskPairSet) -> float:
    """Unweighted mean of per-entity IoU."""
    if not pairs.entries:
        raise EmptySetError("no mask pairs to average")
    return float(np.mean([entity_iou(p, r) for _, p, r in pairs.entries]))


@dataclass(frozen=True)
class CostProfile:
    """Token counts and model shape for the analytic attention cost."""

    L_text: int
    L_img: int
    L_cond: int
    heads: int
    head_dim: int
    layers: int

    def __post_init__(self):
        if min(self.L_text, self.L_img, self.heads, self.head_dim, self.layers) < 1:
            raise ValueError("all fields must be positive (L_cond may be 0)")
        if self.L_cond < 0:
            raise ValueError("L_cond must be >= 0")


def attention_macs(profile: CostProfile) -> int:
    """Multiply-accumulates per forward pass, counting the Q/K/V/O projections
    (4*S*d^2) and the score + value aggregation (2*S^2*d) per layer."""
    S = profile.L_text + profile.L_img + profile.L_cond
    d = profile.heads * profile.head_dim
    per_layer = 4 * S * d * d + 2 * S * S * d
    return profile.layers * per_layer


def citf_report(pre_filter: int, post_filter: int | tuple[int, int, int],
                profile: CostProfile) -> dict:
    """Cost at five settings: no condition tokens, filtered min/avg/max
    retained counts, and unfiltered. Savings are relative to the unfiltered
    cost."""
    if isinstance(post_filter, int):
        post_min = post_avg = post_max = post_filter
    else:
        post_min, post_avg, post_max = post_filter
    if post_max > pre_filter:
        raise ValueError(f"post-filter count {post_max} exceeds pre-filter {pre_filter}")

    def macs_at(l_cond: int) -> int:
        return attention_macs(replace(profile, L_cond=l_cond))

    baseline = macs_at(pre_filter)
    settings = {
        "no_condition": macs_at(0),
        "citf_min": macs_at(post_min),
        "citf_avg": macs_at(post_avg),
        "citf_max": macs_at(post_max),
        "no_citf": baseline,
    }
    return {
        "pre_filter_tokens": pre_filter,
        "post_filter_tokens": {"min": post_min, "avg": post_avg, "max": post_max},
        "macs": settings,
        "savings_pct": {
            name: 100.0 * (baseline - macs) / baseline
            for name, macs in settings.items()
        },
    }
