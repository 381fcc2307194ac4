"""Dense numeric kernels on 2-D float32 matrices.

Storage is float32; every reduction (dot products, softmax denominators,
variances) accumulates in float64 and rounds once on the way out. All
functions are pure and operate on a single sequence (no batch axis).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DegenerateRowError, EmptyInputError, ShapeError

DTYPE = np.float32
ACC = np.float64


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a contiguous 2-D float32 array."""
    arr = np.asarray(m, dtype=DTYPE)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def matmul(a, b) -> np.ndarray:
    """Matrix product with float64 accumulation.

    Results are bit-identical across reruns on the same operands; the same
    rows fed through the same shapes always round the same way.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return (a.astype(ACC) @ b.astype(ACC)).astype(DTYPE)


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax; ``-inf`` entries map to exactly 0.

    Raises:
        DegenerateRowError: if some row is entirely ``-inf``.
    """
    x = np.asarray(m, dtype=ACC)
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D input, got {x.shape}")
    if x.shape[1] == 0:
        raise DegenerateRowError("softmax over an empty row")
    top = x.max(axis=1, keepdims=True)
    if np.any(np.isneginf(top)):
        raise DegenerateRowError("softmax row is entirely -inf")
    e = np.exp(x - top)
    return (e / e.sum(axis=1, keepdims=True)).astype(DTYPE)


def log_softmax(v) -> np.ndarray:
    """Log-softmax of a vector (or of each row of a matrix), in float64."""
    x = np.asarray(v, dtype=ACC)
    top = x.max(axis=-1, keepdims=True)
    shifted = x - top
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def layer_norm(m, gain, bias, eps: float = 1e-5) -> np.ndarray:
    """Normalise each row to zero mean / unit population variance, then scale."""
    x = np.asarray(m, dtype=ACC)
    gain = np.asarray(gain, dtype=ACC).reshape(-1)
    bias = np.asarray(bias, dtype=ACC).reshape(-1)
    if x.ndim != 2 or gain.shape[0] != x.shape[1] or bias.shape[0] != x.shape[1]:
        raise ShapeError(
            f"layer_norm: input {x.shape}, gain {gain.shape}, bias {bias.shape}"
        )
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return ((x - mu) / np.sqrt(var + eps) * gain + bias).astype(DTYPE)


def depthwise_conv1d(m, kernels) -> np.ndarray:
    """Per-channel 1-D convolution along rows with zero "same" padding.

    ``kernels`` has shape ``(channels, width)``; channel ``c`` of the output
    only sees channel ``c`` of the input. Odd widths pad symmetrically; an even
    width ``k`` pads ``(k - 1) // 2`` rows before and ``k // 2`` rows after, so
    the output always keeps the input's row count. Taps are applied as a
    correlation (tap ``j`` multiplies row ``t - pad_before + j``).
    """
    x = np.asarray(m, dtype=ACC)
    w = np.asarray(kernels, dtype=ACC)
    if x.ndim != 2 or w.ndim != 2 or w.shape[0] != x.shape[1]:
        raise ShapeError(f"depthwise_conv1d: input {x.shape}, kernels {w.shape}")
    width = w.shape[1]
    if width < 1:
        raise ShapeError("kernel width must be >= 1")
    before = (width - 1) // 2
    after = width // 2
    padded = np.pad(x, ((before, after), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, width, axis=0)
    # windows: (rows, channels, width)
    return np.einsum("tck,ck->tc", windows, w).astype(DTYPE)


def mean_pool_rows(m) -> np.ndarray:
    """Arithmetic mean over rows, as a 1-D vector."""
    x = np.asarray(m, dtype=ACC)
    if x.ndim != 2:
        raise ShapeError(f"mean_pool_rows expects 2-D input, got {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInputError("mean_pool_rows over zero rows")
    return x.mean(axis=0).astype(DTYPE)


def linear(m, weight, bias=None) -> np.ndarray:
    """``m @ weight.T + bias``; ``weight`` is ``(out, in)``."""
    x = np.asarray(m)
    w = np.asarray(weight)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {w.shape}")
    acc = x.astype(ACC) @ w.astype(ACC).T
    if bias is not None:
        b = np.asarray(bias, dtype=ACC).reshape(-1)
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"linear: bias {b.shape} does not match weight {w.shape}")
        acc = acc + b
    return acc.astype(DTYPE)


def sigmoid(x) -> np.ndarray:
    return expit(np.asarray(x, dtype=ACC))


def swish(m) -> np.ndarray:
    x = np.asarray(m, dtype=ACC)
    return (x * sigmoid(x)).astype(DTYPE)


def glu(m) -> np.ndarray:
    """Gated linear unit over columns: ``first_half * sigmoid(second_half)``."""
    x = np.asarray(m, dtype=ACC)
    if x.ndim != 2 or x.shape[1] % 2:
        raise ShapeError(f"glu needs an even column count, got {x.shape}")
    half = x.shape[1] // 2
    return (x[:, :half] * sigmoid(x[:, half:])).astype(DTYPE)
