"""Slow, independent reference implementations used to cross-check the fast paths.

Nothing here calls into the code it is meant to check.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Optional, Sequence

import numpy as np


def dense_attention(x: np.ndarray, wq, bq, wk, bk, wv, bv, wout, bout, heads: int,
                    position_bias: Optional[np.ndarray] = None,
                    max_distance: int = 16) -> np.ndarray:
    """Plain multi-head self-attention over the rows of ``x``, one query at a time."""
    x = np.asarray(x, dtype=np.float64)
    q = x @ np.asarray(wq, np.float64).T + bq
    k = x @ np.asarray(wk, np.float64).T + bk
    v = x @ np.asarray(wv, np.float64).T + bv
    n, d = x.shape
    dh = d // heads
    out = np.zeros((n, d))
    for h in range(heads):
        cols = slice(h * dh, (h + 1) * dh)
        for i in range(n):
            logits = np.array([q[i, cols] @ k[j, cols] / math.sqrt(dh) for j in range(n)])
            if position_bias is not None:
                for j in range(n):
                    dist = min(max(j - i, -max_distance), max_distance)
                    logits[j] += position_bias[h, dist + max_distance]
            w = np.exp(logits - logits.max())
            w /= w.sum()
            out[i, cols] = w @ v[:, cols]
    return out @ np.asarray(wout, np.float64).T + bout


def suppress_by_resoftmax(logits: np.ndarray, probs: np.ndarray, gamma: float) -> np.ndarray:
    """Weak-attention suppression done the long way: mask the weak logits to
    ``-inf`` and take a fresh softmax over the survivors."""
    logits = np.asarray(logits, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    mu = sum(p) / len(p)
    sigma = math.sqrt(sum((pi - mu) ** 2 for pi in p) / len(p))
    theta = min(mu - gamma * sigma, max(p))
    masked = np.where(p >= theta, logits, -np.inf)
    e = np.exp(masked - masked.max())
    return e / e.sum()


def enumerate_alignments(n_frames: int, targets: Sequence[int], blank: int):
    """Yield every alignment as a list of ``(t, u, class)`` arcs."""
    n_u = len(targets)
    # the last arc is always the final blank; choose label slots among the rest
    for label_slots in itertools.combinations(range(n_frames + n_u - 1), n_u):
        arcs, t, u = [], 0, 0
        slots = set(label_slots)
        for step in range(n_frames + n_u):
            if step in slots:
                arcs.append((t, u, targets[u]))
                u += 1
            else:
                arcs.append((t, u, blank))
                t += 1
        yield arcs


def brute_force_rnnt_loss(log_probs: np.ndarray, targets: Sequence[int], blank: int) -> float:
    """``-log`` of the summed probability of every alignment, by enumeration."""
    lp = np.asarray(log_probs, dtype=np.float64)
    scores = [sum(lp[t, u, k] for t, u, k in arcs)
              for arcs in enumerate_alignments(lp.shape[0], targets, blank)]
    top = max(scores)
    return -(top + math.log(sum(math.exp(s - top) for s in scores)))


def central_differences(f: Callable[[np.ndarray], float], x: np.ndarray,
                        eps: float = 1e-4) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + eps
        hi = f(x)
        x[idx] = orig - eps
        lo = f(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2 * eps)
    return grad


def reference_vgg(features: np.ndarray, params: dict) -> np.ndarray:
    """Whole-utterance VGG front-end with explicit padding and ceil pooling."""
    x = np.asarray(features, dtype=np.float64)[None]  # (channels, time, freq)

    def conv(x, w, b):
        c_out = w.shape[0]
        w = np.asarray(w, np.float64).reshape(c_out, x.shape[0], 3, 3)
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
        out = np.zeros((c_out, x.shape[1], x.shape[2]))
        for dt in range(3):
            for df in range(3):
                patch = xp[:, dt:dt + x.shape[1], df:df + x.shape[2]]
                out += np.einsum("oc,ctf->otf", w[:, :, dt, df], patch)
        return np.maximum(out + np.asarray(b, np.float64)[:, None, None], 0.0)

    def pool(x):
        c, t, f = x.shape
        if t % 2:
            x = np.concatenate([x, np.full((c, 1, f), -np.inf)], axis=1)
        return x.reshape(c, -1, 2, f // 2, 2).max(axis=(2, 4))

    for stage in ("1", "2"):
        x = conv(x, params[f"frontend.conv{stage}a.weight"], params[f"frontend.conv{stage}a.bias"])
        x = conv(x, params[f"frontend.conv{stage}b.weight"], params[f"frontend.conv{stage}b.bias"])
        x = pool(x)
    flat = x.transpose(1, 0, 2).reshape(x.shape[1], -1)
    return flat @ np.asarray(params["frontend.proj.weight"], np.float64).T + params["frontend.proj.bias"]
