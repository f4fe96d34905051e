"""Numeric core: 2D rotary embedding, masked-and-biased attention, low-rank
adapter merging, and a forward-only three-branch attention block.

Parameter initialization runs on a splitmix64 counter stream feeding a
Box-Muller transform, so identical seeds are bit-reproducible across
platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attn_masks import AttentionMask
from .conditioning import BiasMatrix, ConditionTokens
from .errors import DimensionMismatchError, ShapeMismatchError, UnreachableQueryError

ROPE_BASE = 10000.0
MASK_SENTINEL = -1e9  # exp underflows to exactly 0 in float64


# ---------------------------------------------------------------------------
# Seeded initialization

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def gaussian(seed: int, shape: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
    """Standard normals from a counter-based splitmix64 stream."""
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    half = (n + 1) // 2
    counter = np.arange(1, 2 * half + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        raw = _mix64(np.uint64(seed) + counter * _GOLDEN)
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    u1 = np.maximum(u[:half], 2.0 ** -53)  # avoid log(0)
    u2 = u[half:]
    r = np.sqrt(-2.0 * np.log(u1))
    normals = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return (scale * normals[:n]).reshape(shape)


# ---------------------------------------------------------------------------
# Low-rank adapters

@dataclass(frozen=True)
class LoraAdapter:
    """Low-rank update W + scale * (B @ A), with A (r, d) and B (d, r)."""

    A: np.ndarray
    B: np.ndarray
    scale: float = 1.0

    @property
    def rank(self) -> int:
        return self.A.shape[0]

    @classmethod
    def zero(cls, d: int, r: int) -> "LoraAdapter":
        return cls(A=np.zeros((r, d)), B=np.zeros((d, r)))


def merge_lora(W: np.ndarray, adapter: LoraAdapter) -> np.ndarray:
    """Fold an adapter into a base weight matrix."""
    d = W.shape[0]
    if W.shape != (d, d) or adapter.A.shape[1] != d or adapter.B.shape[0] != d \
            or adapter.A.shape[0] != adapter.B.shape[1]:
        raise ShapeMismatchError(
            f"W {W.shape}, A {adapter.A.shape}, B {adapter.B.shape} do not conform"
        )
    return W + adapter.scale * (adapter.B @ adapter.A)


# ---------------------------------------------------------------------------
# Rotary position embedding

def rope_2d(tokens: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Axial 2D rotary embedding: the first d/2 coordinates rotate with
    row-indexed frequencies, the second d/2 with column-indexed frequencies.

    Pair j within a half rotates by pos / ROPE_BASE**(2j / (d/2)).
    Position (0, 0) is the identity; all rotations preserve norms.
    """
    tokens = np.asarray(tokens, dtype=np.float64)
    n, d = tokens.shape
    if d % 4 != 0:
        raise DimensionMismatchError(f"model dim must be divisible by 4, got {d}")
    positions = np.asarray(positions)
    if positions.shape != (n, 2):
        raise DimensionMismatchError(f"need {n} (row, col) positions, got {positions.shape}")

    half = d // 2
    pairs = half // 2
    j = np.arange(pairs, dtype=np.float64)
    inv_freq = ROPE_BASE ** (-2.0 * j / half)  # (pairs,)

    out = np.empty_like(tokens)
    for axis, sl in ((0, slice(0, half)), (1, slice(half, d))):
        angles = positions[:, axis, None].astype(np.float64) * inv_freq  # (n, pairs)
        cos, sin = np.cos(angles), np.sin(angles)
        x = tokens[:, sl]
        even, odd = x[:, 0::2], x[:, 1::2]
        rotated = np.empty_like(x)
        rotated[:, 0::2] = even * cos - odd * sin
        rotated[:, 1::2] = even * sin + odd * cos
        out[:, sl] = rotated
    return out


# ---------------------------------------------------------------------------
# Attention

def attention_weights(Q: np.ndarray, K: np.ndarray, mask: AttentionMask,
                      bias: BiasMatrix | None, heads: int) -> np.ndarray:
    """Per-head softmax weights, shape (heads, n, n). Disallowed pairs get a
    -1e9 logit, which underflows to an exactly-zero weight."""
    n, d = Q.shape
    if d % heads != 0:
        raise ShapeMismatchError(f"dim {d} not divisible by {heads} heads")
    if mask.size != n:
        raise ShapeMismatchError(f"mask size {mask.size} != sequence length {n}")
    report = np.flatnonzero(~mask.allowed.any(axis=1))
    if report.size:
        raise UnreachableQueryError(f"queries with no allowed key: {report.tolist()}")

    d_h = d // heads
    Qh = Q.reshape(n, heads, d_h).transpose(1, 0, 2)
    Kh = K.reshape(n, heads, d_h).transpose(1, 0, 2)
    logits = Qh @ Kh.transpose(0, 2, 1) / np.sqrt(d_h)
    if bias is not None:
        logits = logits + bias.values[None]
    logits = np.where(mask.allowed[None], logits, MASK_SENTINEL)
    # after the shift, sentinel logits still sit near -1e9, so exp is exactly 0
    logits -= logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=-1, keepdims=True)


def masked_attention(Q: np.ndarray, K: np.ndarray, V: np.ndarray,
                     mask: AttentionMask, bias: BiasMatrix | None,
                     heads: int) -> np.ndarray:
    """Multi-head scaled dot-product attention with a boolean mask and an
    additive bias; head outputs concatenated."""
    n, d = Q.shape
    weights = attention_weights(Q, K, mask, bias, heads)
    Vh = V.reshape(n, heads, d // heads).transpose(1, 0, 2)
    out = weights @ Vh
    return out.transpose(1, 0, 2).reshape(n, d)


# ---------------------------------------------------------------------------
# Three-branch block

_PROJ = ("q", "k", "v", "o")


@dataclass(frozen=True)
class BranchWeights:
    """Query/key/value/output projections for one branch, with adapters."""

    weights: dict[str, np.ndarray]
    adapters: dict[str, LoraAdapter]

    def merged(self, name: str) -> np.ndarray:
        return merge_lora(self.weights[name], self.adapters[name])


@dataclass(frozen=True)
class BranchParams:
    """Parameters for the text, image, and condition branches.

    The condition branch starts from the image branch's base weights; only
    its adapters differ, so with zero adapters the two branches coincide.
    """

    text: BranchWeights
    image: BranchWeights
    cond: BranchWeights
    dim: int
    heads: int


def init_branch_params(d: int, heads: int, seed: int, rank: int = 0,
                       weight_scale: float = 0.2) -> BranchParams:
    """Seeded parameters; rank 0 means zero adapters on every projection."""
    if d % heads != 0 or d % 4 != 0:
        raise ShapeMismatchError(f"dim {d} must be divisible by 4 and by {heads} heads")

    def branch(tag: int, base: dict[str, np.ndarray] | None = None) -> BranchWeights:
        weights = base if base is not None else {
            name: gaussian(seed + tag * 1000 + i, (d, d), scale=weight_scale / np.sqrt(d))
            for i, name in enumerate(_PROJ)
        }
        if rank > 0:
            adapters = {
                name: LoraAdapter(
                    A=gaussian(seed + tag * 1000 + 100 + i, (rank, d), scale=1.0 / np.sqrt(d)),
                    B=np.zeros((d, rank)),
                )
                for i, name in enumerate(_PROJ)
            }
        else:
            adapters = {name: LoraAdapter.zero(d, 1) for name in _PROJ}
        return BranchWeights(weights=weights, adapters=adapters)

    text = branch(1)
    image = branch(2)
    cond = branch(3, base=image.weights)  # shared base, per the branch contract
    return BranchParams(text=text, image=image, cond=cond, dim=d, heads=heads)


def _joint_qkv(text: np.ndarray, image: np.ndarray, cond: ConditionTokens | None,
               image_positions: np.ndarray, params: BranchParams,
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-branch projections with rotary applied to image and condition Q/K,
    concatenated into the joint [text | image | condition] sequence."""
    d = params.dim
    n_text = text.shape[0]
    cond_tokens = cond.tokens if cond is not None else np.zeros((0, d))
    cond_positions = cond.source_positions if cond is not None else np.zeros((0, 2), dtype=np.int64)
    segments = (
        (text, params.text, np.zeros((n_text, 2), dtype=np.int64)),
        (image, params.image, np.asarray(image_positions)),
        (cond_tokens, params.cond, np.asarray(cond_positions)),
    )
    Qs, Ks, Vs = [], [], []
    for x, branch, pos in segments:
        q = x @ branch.merged("q").T
        k = x @ branch.merged("k").T
        v = x @ branch.merged("v").T
        Qs.append(rope_2d(q, pos) if x.shape[0] else q)
        Ks.append(rope_2d(k, pos) if x.shape[0] else k)
        Vs.append(v)
    return np.concatenate(Qs), np.concatenate(Ks), np.concatenate(Vs)


def block_attention_weights(text: np.ndarray, image: np.ndarray,
                            cond: ConditionTokens | None, image_positions: np.ndarray,
                            params: BranchParams, mask: AttentionMask,
                            bias: BiasMatrix | None) -> np.ndarray:
    """Softmax weights (heads, S, S) of the joint pass, for diagnostics."""
    Q, K, _ = _joint_qkv(text, image, cond, image_positions, params)
    return attention_weights(Q, K, mask, bias, params.heads)


def block_forward(text: np.ndarray, image: np.ndarray, cond: ConditionTokens | None,
                  image_positions: np.ndarray, params: BranchParams,
                  mask: AttentionMask, bias: BiasMatrix | None,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One joint attention pass over [text | image | condition].

    Rotary positions are applied to image and condition Q/K; condition tokens
    reuse their source grid positions so spatial alignment is shared with the
    image segment. Returns the three output segments.
    """
    n_text, n_img = text.shape[0], image.shape[0]
    n_cond = len(cond) if cond is not None else 0
    if mask.size != n_text + n_img + n_cond:
        raise ShapeMismatchError(
            f"mask size {mask.size} != segments {n_text}+{n_img}+{n_cond}"
        )
    Q, K, V = _joint_qkv(text, image, cond, image_positions, params)
    out = masked_attention(Q, K, V, mask, bias, params.heads)
    text_out = out[:n_text] @ params.text.merged("o").T
    image_out = out[n_text:n_text + n_img] @ params.image.merged("o").T
    cond_out = out[n_text + n_img:] @ params.cond.merged("o").T
    return text_out, image_out, cond_out
