"""Feature-matrix file format and the seeded synthetic feature generator.

File layout (all little-endian)::

    bytes 0-3    magic  b"FEAT"
    bytes 4-7    u32    version (1)
    bytes 8-11   u32    num_frames
    bytes 12-15  u32    num_bins
    bytes 16-    f32    num_frames * num_bins values, row-major

The same container stores encoder outputs, with ``num_bins`` set to the model
width.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .encoder import NUM_MEL_BINS
from .errors import FormatError

MAGIC = b"FEAT"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_features(path, frames) -> None:
    frames = np.asarray(frames, dtype="<f4")
    if frames.ndim != 2:
        raise ValueError(f"features must be 2-D, got {frames.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, frames.shape[0], frames.shape[1]))
        fh.write(np.ascontiguousarray(frames).tobytes())


def read_features(path, num_bins: int | None = NUM_MEL_BINS) -> np.ndarray:
    """Read a FEAT file; ``num_bins=None`` accepts any width."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n_frames, n_bins = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if num_bins is not None and n_bins != num_bins:
        raise FormatError(f"{path}: expected {num_bins} bins, found {n_bins}")
    expected = _HEADER.size + 4 * n_frames * n_bins
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(n_frames, n_bins).astype(np.float32)


def synth_features(seed: int, num_frames: int, num_bins: int = NUM_MEL_BINS) -> np.ndarray:
    """Seeded log-mel-like frames.

    Uses numpy's PCG64 bit generator and only its ``random()`` doubles
    (53-bit mantissa from the top of each 64-bit draw), which are stable
    across platforms. Each utterance gets a smooth random spectral envelope
    plus per-frame energy and uniform noise, in roughly ``[-8, 4]``.
    """
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    knots = rng.random(9) * 4.0 - 4.0
    envelope = np.interp(np.linspace(0, 8, num_bins), np.arange(9), knots)
    energy = rng.random((num_frames, 1)) * 3.0 - 1.5
    noise = rng.random((num_frames, num_bins)) - 0.5
    return (envelope[None, :] + energy + noise).astype(np.float32)
