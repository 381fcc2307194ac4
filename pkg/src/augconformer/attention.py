"""Multi-head attention over one segment with an augmented memory bank.

The query stacks the segment's left/center/right rows plus one summary row
(the mean of the center rows). Keys and values stack the memory bank ahead of
the segment rows. The summary row's attention output becomes the next memory
slot, so information flows forward across segments without the query ever
seeing memory directly.

Weak-attention suppression optionally drops, per head and per query row, the
probabilities below ``mean - gamma * std`` and renormalises the survivors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ShapeError
from .tensor import ACC, DTYPE, as_matrix, mean_pool_rows

#: Signed frame distances are clipped to ``[-MAX_DISTANCE, MAX_DISTANCE]``.
MAX_DISTANCE = 16
#: Bucket shared by every memory slot.
MEMORY_BUCKET = 2 * MAX_DISTANCE + 1
NUM_BUCKETS = MEMORY_BUCKET + 1


@dataclass(frozen=True)
class SegmentInput:
    """Left context, center and right context rows of one segment."""

    left: np.ndarray
    center: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        parts = [as_matrix(p, name) for p, name in
                 ((self.left, "left"), (self.center, "center"), (self.right, "right"))]
        dims = {p.shape[1] for p in parts}
        if len(dims) != 1:
            raise ShapeError(f"segment parts disagree on width: {[p.shape for p in parts]}")
        if parts[1].shape[0] < 1:
            raise ShapeError("segment center must have at least one row")
        object.__setattr__(self, "left", parts[0])
        object.__setattr__(self, "center", parts[1])
        object.__setattr__(self, "right", parts[2])

    @classmethod
    def from_rows(cls, rows, n_left: int, n_center: int) -> "SegmentInput":
        rows = as_matrix(rows)
        return cls(rows[:n_left], rows[n_left:n_left + n_center], rows[n_left + n_center:])

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.left.shape[0], self.center.shape[0], self.right.shape[0]

    @property
    def dim(self) -> int:
        return self.center.shape[1]

    def rows(self) -> np.ndarray:
        return np.concatenate([self.left, self.center, self.right], axis=0)


@dataclass(frozen=True)
class MemoryBank:
    """Append-only stack of memory slots; FIFO eviction once ``cap`` is reached."""

    slots: np.ndarray
    cap: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "slots", as_matrix(self.slots, "memory slots"))
        if self.cap is not None and self.cap < 0:
            raise ValueError("memory cap must be >= 0")

    @classmethod
    def empty(cls, dim: int, cap: Optional[int] = None) -> "MemoryBank":
        return cls(np.zeros((0, dim), dtype=DTYPE), cap)

    def __len__(self) -> int:
        return self.slots.shape[0]

    @property
    def dim(self) -> int:
        return self.slots.shape[1]

    def append(self, slot) -> "MemoryBank":
        slot = np.asarray(slot, dtype=DTYPE).reshape(1, -1)
        if slot.shape[1] != self.dim:
            raise ShapeError(f"slot width {slot.shape[1]} != bank width {self.dim}")
        slots = np.concatenate([self.slots, slot], axis=0)
        if self.cap is not None:
            slots = slots[max(0, slots.shape[0] - self.cap):]
        return MemoryBank(slots, self.cap)


@dataclass(frozen=True)
class SuppressionConfig:
    gamma: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")


@dataclass
class AttentionWeights:
    """Projection matrices (``(out, in)`` layout) and the per-head bucket bias."""

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wout: np.ndarray
    bout: np.ndarray
    position_bias: np.ndarray
    heads: int = 4

    def __post_init__(self):
        d = self.wq.shape[0]
        if d % self.heads:
            raise ShapeError(f"model dim {d} not divisible by {self.heads} heads")
        if self.position_bias.shape != (self.heads, NUM_BUCKETS):
            raise ShapeError(
                f"position_bias must be ({self.heads}, {NUM_BUCKETS}), "
                f"got {self.position_bias.shape}"
            )

    @property
    def dim(self) -> int:
        return self.wq.shape[0]


def _project(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"input width {x.shape[1]} does not match projection {w.shape}")
    return x.astype(ACC) @ w.astype(ACC).T + b.astype(ACC)


def build_query(seg: SegmentInput, w: AttentionWeights) -> np.ndarray:
    """Project ``[left; center; right; summary]``; returns ``L+C+R+1`` rows (float64)."""
    summary = mean_pool_rows(seg.center)[None, :]
    return _project(np.concatenate([seg.rows(), summary], axis=0), w.wq, w.bq)


def build_key_value(seg: SegmentInput, mem: MemoryBank,
                    w: AttentionWeights) -> tuple[np.ndarray, np.ndarray]:
    """Project ``[memory; left; center; right]`` into keys and values (float64)."""
    if len(mem) and mem.dim != seg.dim:
        raise ShapeError(f"memory width {mem.dim} != segment width {seg.dim}")
    stacked = np.concatenate([mem.slots, seg.rows()], axis=0) if len(mem) else seg.rows()
    return _project(stacked, w.wk, w.bk), _project(stacked, w.wv, w.bv)


def bucket_indices(n_frames: int, n_memory: int) -> np.ndarray:
    """Bucket index for every (query, key) pair of one segment.

    Frame queries see memory keys through ``MEMORY_BUCKET`` and frame keys
    through their clipped signed distance ``key - query``. The summary query
    (last row) carries no position and is marked ``-1``.
    """
    q = np.arange(n_frames)[:, None]
    k = np.arange(n_frames)[None, :]
    frame_buckets = np.clip(k - q, -MAX_DISTANCE, MAX_DISTANCE) + MAX_DISTANCE
    out = np.full((n_frames + 1, n_memory + n_frames), -1, dtype=np.int64)
    out[:n_frames, :n_memory] = MEMORY_BUCKET
    out[:n_frames, n_memory:] = frame_buckets
    return out


def position_bias_logits(table: np.ndarray, n_frames: int, n_memory: int) -> np.ndarray:
    """Gather ``(heads, n_frames + 1, n_memory + n_frames)`` logit offsets."""
    idx = bucket_indices(n_frames, n_memory)
    bias = np.asarray(table, dtype=ACC)[:, np.maximum(idx, 0)]
    bias[:, idx < 0] = 0.0
    return bias


def weak_attention_suppress(p, gamma: float) -> np.ndarray:
    """Zero the entries below ``mean - gamma * std`` and renormalise.

    Works on the last axis of ``p``. Entries equal to the threshold are kept.
    The standard deviation is the population one.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    p = np.asarray(p, dtype=ACC)
    mu = p.mean(axis=-1, keepdims=True)
    sigma = p.std(axis=-1, keepdims=True)
    theta = mu - gamma * sigma
    # rounding in mean() can exceed max(p) on near-uniform rows; max must survive
    theta = np.minimum(theta, p.max(axis=-1, keepdims=True))
    kept = np.where(p >= theta, p, 0.0)
    return kept / kept.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def attend(q: np.ndarray, k: np.ndarray, v: np.ndarray, w: AttentionWeights,
           sup: SuppressionConfig, bias: Optional[np.ndarray] = None):
    """Scaled dot-product attention across heads, then the output projection.

    Args:
        q, k, v: projected query/key/value rows, ``(n, d)``.
        w: supplies the head count and the output projection.
        sup: weak-attention suppression settings.
        bias: optional ``(heads, nq, nk)`` additive logit offsets.

    Returns:
        ``(out, probs)`` where ``out`` is ``(nq, d)`` float64 and ``probs`` is the
        ``(heads, nq, nk)`` post-suppression probability tensor.
    """
    heads = w.heads
    dh = q.shape[1] // heads
    qh, kh, vh = (_split_heads(np.asarray(x, dtype=ACC), heads) for x in (q, k, v))
    logits = qh @ kh.transpose(0, 2, 1) / np.sqrt(dh)
    if bias is not None:
        logits = logits + bias
    logits -= logits.max(axis=-1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=-1, keepdims=True)
    if sup.enabled:
        probs = weak_attention_suppress(probs, sup.gamma)
    context = (probs @ vh).transpose(1, 0, 2).reshape(q.shape[0], -1)
    out = context @ w.wout.astype(ACC).T + w.bout.astype(ACC)
    return out, probs


def update_memory(mem: MemoryBank, summary_probs: np.ndarray, v: np.ndarray,
                  w: AttentionWeights) -> MemoryBank:
    """Append the attention output of the summary query as a new slot.

    ``summary_probs`` is ``(heads, nk)``: one post-suppression distribution per
    head over the value rows ``v`` (``(nk, d)``). Each head's weighted sum of its
    value slice is concatenated and sent through the output projection.
    """
    vh = _split_heads(np.asarray(v, dtype=ACC), w.heads)
    per_head = np.einsum("hk,hkd->hd", np.asarray(summary_probs, dtype=ACC), vh)
    slot = per_head.reshape(-1) @ w.wout.astype(ACC).T + w.bout.astype(ACC)
    return mem.append(slot.astype(DTYPE))


@dataclass
class LayerTrace:
    """Introspection record of one :func:`augmem_layer_forward` call."""

    query_rows: int
    key_rows: int
    probs: np.ndarray = field(repr=False)


def augmem_layer_forward(seg: SegmentInput, mem: MemoryBank, w: AttentionWeights,
                         sup: SuppressionConfig, trace: Optional[list] = None):
    """Run augmented-memory attention over one segment.

    Returns the attended ``SegmentInput`` (same row counts as ``seg``) and the
    memory bank advanced by one slot.
    """
    q = build_query(seg, w)
    k, v = build_key_value(seg, mem, w)
    n_frames = q.shape[0] - 1
    bias = position_bias_logits(w.position_bias, n_frames, len(mem))
    out, probs = attend(q, k, v, w, sup, bias)
    new_mem = update_memory(mem, probs[:, -1, :], v, w)
    if trace is not None:
        trace.append(LayerTrace(q.shape[0], k.shape[0], probs))
    n_left, n_center, _ = seg.sizes
    return SegmentInput.from_rows(out[:-1].astype(DTYPE), n_left, n_center), new_mem
