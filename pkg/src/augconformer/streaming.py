"""Block-wise streaming over an unbounded feature stream.

Raw frames go through the incremental front-end; the resulting encoder frames
are cut into segments of ``center`` frames, each carrying up to ``left``
frames of history and ``right`` frames of lookahead. A segment is processed
as soon as its right context is available, and only its center rows are
emitted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attention import SegmentInput
from .encoder import (FRAME_SHIFT_MS, SUBSAMPLE_FACTOR, EncoderModel, EncoderState,
                      StreamingFrontend, encoder_forward_segment)
from .errors import ConfigError, ShapeError, StreamStateError
from .tensor import DTYPE, as_matrix


@dataclass(frozen=True)
class SegmenterConfig:
    left: int = 16
    center: int = 32
    right: int = 8
    subsample_factor: int = SUBSAMPLE_FACTOR
    frame_shift_ms: float = FRAME_SHIFT_MS

    def __post_init__(self):
        if self.center < 1 or self.left < 0 or self.right < 0:
            raise ConfigError("segmenter needs center >= 1 and left, right >= 0")

    @classmethod
    def from_encoder(cls, cfg) -> "SegmenterConfig":
        return cls(cfg.left, cfg.center, cfg.right)

    @property
    def span(self) -> int:
        return self.left + self.center + self.right


def lookahead_ms(cfg: SegmenterConfig) -> float:
    """Algorithmic latency contributed by the right context."""
    return cfg.right * cfg.subsample_factor * cfg.frame_shift_ms


@dataclass
class SegmentRecord:
    index: int
    start: int
    n_left: int
    n_center: int
    n_right: int
    key_length: int
    memory_slots: list


class StreamSession:
    """All mutable state of one streaming utterance.

    A session is single-writer: calls to ``push_*`` and :meth:`finalize` must
    be serialised by the caller. Sessions never share mutable state, so any
    number of them can run side by side over the same model.
    """

    def __init__(self, model: EncoderModel, keep_traces: bool = False):
        self.model = model
        self.segmenter = SegmenterConfig.from_encoder(model.config)
        self.state = EncoderState(model.new_memory(), [] if keep_traces else None)
        self.frontend: Optional[StreamingFrontend] = None
        self._frames = np.zeros((0, model.config.model_dim), dtype=DTYPE)
        self._offset = 0
        self._next_center = 0
        self.segments: list[SegmentRecord] = []
        self.finalized = False
        self._mode: Optional[str] = None

    @property
    def frames_received(self) -> int:
        """Encoder frames buffered so far (absolute count)."""
        return self._offset + self._frames.shape[0]

    @property
    def segments_emitted(self) -> int:
        return len(self.segments)

    @property
    def memory_sizes(self) -> list[int]:
        return [len(b) for b in self.state.banks]

    def _check_open(self, mode: str) -> None:
        if self.finalized:
            raise StreamStateError("session already finalized")
        if self._mode is not None and self._mode != mode:
            raise StreamStateError(f"session is fed {self._mode}, not {mode}")
        self._mode = mode

    def push_features(self, chunk) -> np.ndarray:
        """Feed raw feature frames; return the center rows of completed segments."""
        self._check_open("features")
        if self.frontend is None:
            self.frontend = StreamingFrontend(self.model.params)
        return self._ingest(self.frontend.push(chunk), final=False)

    def push_encoder_frames(self, frames) -> np.ndarray:
        """Feed already-subsampled, projected encoder frames (front-end bypass)."""
        self._check_open("encoder frames")
        frames = as_matrix(frames, "encoder frames")
        if frames.shape[1] != self.model.config.model_dim:
            raise ShapeError(f"encoder frames must have {self.model.config.model_dim} columns")
        return self._ingest(frames, final=False)

    def finalize(self) -> np.ndarray:
        """Flush the tail: remaining frames form segments with truncated right context."""
        if self.finalized:
            raise StreamStateError("session already finalized")
        tail = self.frontend.finalize() if self.frontend is not None else None
        self.finalized = True
        return self._ingest(tail, final=True)

    def _ingest(self, frames: Optional[np.ndarray], final: bool) -> np.ndarray:
        if frames is not None and frames.shape[0]:
            self._frames = np.concatenate([self._frames, frames], axis=0)
        cfg = self.segmenter
        out = []
        while self.frames_received - self._next_center >= cfg.center + cfg.right:
            out.append(self._process(cfg.center, cfg.right))
        if final:
            remaining = self.frames_received - self._next_center
            while remaining > 0:
                n_center = min(cfg.center, remaining)
                out.append(self._process(n_center, min(cfg.right, remaining - n_center)))
                remaining -= n_center
        if not out:
            return np.zeros((0, self.model.config.model_dim), dtype=DTYPE)
        return np.concatenate(out, axis=0)

    def _process(self, n_center: int, n_right: int) -> np.ndarray:
        cfg = self.segmenter
        start = self._next_center
        n_left = min(cfg.left, start)
        lo = start - n_left - self._offset
        rows = self._frames[lo:lo + n_left + n_center + n_right]
        key_length = len(self.state.banks[0]) + rows.shape[0]
        seg = SegmentInput.from_rows(rows, n_left, n_center)
        center = encoder_forward_segment(self.model, self.state, seg)
        self.segments.append(SegmentRecord(len(self.segments) + 1, start, n_left, n_center,
                                           n_right, key_length, self.memory_sizes))
        self._next_center = start + n_center
        keep_from = max(self._next_center - cfg.left, self._offset)
        self._frames = self._frames[keep_from - self._offset:]
        self._offset = keep_from
        return center


def encode(model: EncoderModel, features) -> np.ndarray:
    """Offline convenience: stream a whole utterance in one push."""
    session = StreamSession(model)
    return np.concatenate([session.push_features(features), session.finalize()], axis=0)


@dataclass
class SegmentCost:
    segment: int
    key_length: int
    memory_slots: int
    wall_ms: float


def bench_segment_costs(model: EncoderModel, num_segments: int,
                        memory_cap: Optional[int] = None, seed: int = 0) -> list[SegmentCost]:
    """Time ``num_segments`` steady-state segments through the whole encoder.

    Every segment is full size (``left + center + right`` rows, including the
    first) so the reported key length isolates the memory-bank growth:
    ``min(n - 1, cap) + left + center + right`` for segment ``n``.
    """
    if num_segments < 1:
        raise ValueError("num_segments must be >= 1")
    cfg = model.config.with_(memory_cap=memory_cap)
    bench_model = EncoderModel(cfg, model.params)
    seg_cfg = SegmenterConfig.from_encoder(cfg)
    rng = np.random.Generator(np.random.PCG64(seed))
    state = EncoderState(bench_model.new_memory(), [])
    report = []
    for n in range(1, num_segments + 1):
        rows = rng.uniform(-1.0, 1.0, size=(seg_cfg.span, cfg.model_dim)).astype(DTYPE)
        seg = SegmentInput.from_rows(rows, seg_cfg.left, seg_cfg.center)
        t0 = time.perf_counter()
        encoder_forward_segment(bench_model, state, seg)
        wall = (time.perf_counter() - t0) * 1e3
        key_length = state.traces[-1][0].key_rows
        state.traces.clear()
        report.append(SegmentCost(n, key_length, len(state.banks[0]), wall))
    return report
