"""Acoustic encoder: VGG subsampling front-end and a stack of Conformer blocks.

Every block runs on one segment at a time (left | center | right rows) and
its attention is the augmented-memory layer from :mod:`augconformer.attention`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import tensor as T
from .attention import (NUM_BUCKETS, AttentionWeights, MemoryBank, SegmentInput,
                        SuppressionConfig, augmem_layer_forward)
from .errors import ConfigError, EmptyInputError, ShapeError, StreamStateError

NUM_MEL_BINS = 80
SUBSAMPLE_FACTOR = 4
FRAME_SHIFT_MS = 10.0

#: Encoder frame ``k`` reads raw frames ``4k - 6 .. 4k + 9``.
RAW_CONTEXT_BEFORE = 6
RAW_CONTEXT_AFTER = 9

_PRESETS = {
    ("conformer", "S"): dict(num_layers=16, model_dim=144, heads=4, conv_kernel=32),
    ("conformer", "M"): dict(num_layers=16, model_dim=256, heads=4, conv_kernel=32),
    ("transformer", "S"): dict(num_layers=16, model_dim=160, heads=4, conv_kernel=0),
    ("transformer", "M"): dict(num_layers=16, model_dim=288, heads=4, conv_kernel=0),
}


@dataclass(frozen=True)
class EncoderConfig:
    variant: str = "conformer"
    num_layers: int = 16
    model_dim: int = 144
    heads: int = 4
    conv_kernel: int = 32
    ffn_expansion: int = 4
    left: int = 16
    center: int = 32
    right: int = 8
    gamma: float = 0.5
    suppression: bool = True
    memory_cap: Optional[int] = None
    num_mel_bins: int = NUM_MEL_BINS
    vgg_channels: tuple = (32, 64)
    norm_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "vgg_channels", tuple(self.vgg_channels))
        if self.variant not in ("conformer", "transformer"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.num_layers < 1 or self.model_dim < 1 or self.heads < 1:
            raise ConfigError("num_layers, model_dim and heads must be positive")
        if self.model_dim % self.heads:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.variant == "conformer" and self.conv_kernel < 1:
            raise ConfigError("conformer variant needs conv_kernel >= 1")
        if self.center < 1 or self.left < 0 or self.right < 0:
            raise ConfigError("segment sizes need center >= 1 and left, right >= 0")
        if self.memory_cap is not None and self.memory_cap < 0:
            raise ConfigError("memory_cap must be >= 0")
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ConfigError("gamma must be finite and >= 0")
        if self.num_mel_bins % 4 or len(self.vgg_channels) != 2:
            raise ConfigError("front-end needs mel bins divisible by 4 and two VGG stages")

    @classmethod
    def preset(cls, variant: str = "conformer", size: str = "S", **overrides) -> "EncoderConfig":
        try:
            base = _PRESETS[(variant, size.upper())]
        except KeyError:
            raise ConfigError(f"no preset for {variant!r} size {size!r}") from None
        return cls(variant=variant, **{**base, **overrides})

    @property
    def has_conv(self) -> bool:
        return self.variant == "conformer"

    @property
    def suppression_config(self) -> SuppressionConfig:
        return SuppressionConfig(self.gamma, self.suppression)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vgg_channels"] = list(self.vgg_channels)
        return d

    def with_(self, **changes) -> "EncoderConfig":
        return replace(self, **changes)


def subsampled_length(num_frames: int) -> int:
    """Encoder frames produced from ``num_frames`` raw frames (two ceil halvings)."""
    return -(-(-(-num_frames // 2)) // 2)


def encoder_parameter_shapes(cfg: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape of every encoder parameter, in initialisation order."""
    d, c1, c2 = cfg.model_dim, *cfg.vgg_channels
    shapes: dict[str, tuple[int, ...]] = {
        "frontend.conv1a.weight": (c1, 1 * 9), "frontend.conv1a.bias": (c1,),
        "frontend.conv1b.weight": (c1, c1 * 9), "frontend.conv1b.bias": (c1,),
        "frontend.conv2a.weight": (c2, c1 * 9), "frontend.conv2a.bias": (c2,),
        "frontend.conv2b.weight": (c2, c2 * 9), "frontend.conv2b.bias": (c2,),
        "frontend.proj.weight": (d, c2 * (cfg.num_mel_bins // 4)), "frontend.proj.bias": (d,),
    }
    hidden = cfg.ffn_expansion * d
    for i in range(cfg.num_layers):
        p = f"layers.{i}."
        for ffn in ("ffn1", "ffn2"):
            shapes.update({
                f"{p}{ffn}.norm.gain": (d,), f"{p}{ffn}.norm.bias": (d,),
                f"{p}{ffn}.w1": (hidden, d), f"{p}{ffn}.b1": (hidden,),
                f"{p}{ffn}.w2": (d, hidden), f"{p}{ffn}.b2": (d,),
            })
            if ffn == "ffn1":
                shapes.update({f"{p}attn.norm.gain": (d,), f"{p}attn.norm.bias": (d,)})
                for proj in ("q", "k", "v", "out"):
                    shapes.update({f"{p}attn.w{proj}": (d, d), f"{p}attn.b{proj}": (d,)})
                shapes[f"{p}attn.position_bias"] = (cfg.heads, NUM_BUCKETS)
                if cfg.has_conv:
                    shapes.update({
                        f"{p}conv.norm.gain": (d,), f"{p}conv.norm.bias": (d,),
                        f"{p}conv.pw1.weight": (2 * d, d), f"{p}conv.pw1.bias": (2 * d,),
                        f"{p}conv.dw.weight": (d, cfg.conv_kernel), f"{p}conv.dw.bias": (d,),
                        f"{p}conv.dw_norm.gain": (d,), f"{p}conv.dw_norm.bias": (d,),
                        f"{p}conv.pw2.weight": (d, d), f"{p}conv.pw2.bias": (d,),
                    })
        shapes.update({f"{p}final_norm.gain": (d,), f"{p}final_norm.bias": (d,)})
    return shapes


def init_parameters(shapes: dict[str, tuple[int, ...]], seed: int,
                    scale: float = 0.1) -> dict[str, np.ndarray]:
    """Seeded uniform(-scale, scale) init; norm gains start at 1 and norm biases at 0."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params = {}
    for name, shape in shapes.items():
        if ".norm." in name or "_norm." in name:
            value = np.ones(shape) if name.endswith(".gain") else np.zeros(shape)
        else:
            value = rng.uniform(-scale, scale, size=shape)
        params[name] = value.astype(T.DTYPE)
    return params


# ---------------------------------------------------------------- front-end

class _Rows:
    """Rows ``(freq, channels)`` of one front-end layer, indexed by absolute time."""

    def __init__(self, freq: int, channels: int):
        self.data = np.zeros((0, freq, channels), dtype=T.DTYPE)
        self.offset = 0

    @property
    def count(self) -> int:
        return self.offset + self.data.shape[0]

    def append(self, rows: np.ndarray) -> None:
        self.data = np.concatenate([self.data, rows.astype(T.DTYPE)], axis=0)

    def gather(self, idx: np.ndarray, valid_len: int) -> np.ndarray:
        """Rows at absolute positions ``idx``; positions outside ``[0, valid_len)`` are zero."""
        inside = (idx >= 0) & (idx < valid_len)
        local = np.clip(idx - self.offset, 0, max(self.data.shape[0] - 1, 0))
        if self.data.shape[0] == 0:
            return np.zeros(idx.shape + self.data.shape[1:], dtype=T.DTYPE)
        out = self.data[local]
        out[~inside] = 0.0
        return out

    def drop_before(self, position: int) -> None:
        cut = min(max(position - self.offset, 0), self.data.shape[0])
        if cut:
            self.data = self.data[cut:]
            self.offset += cut


def _conv_rows(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3 convolution + ReLU producing one output row per item of ``x``.

    ``x`` is ``(n, 3, freq, c_in)``: the three input rows around each output
    row. Every item is its own ``(freq, 9 c_in) @ (9 c_in, c_out)`` product, so
    a row's value never depends on which other rows share the batch.
    """
    n, _, f, _ = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (0, 0)))
    patches = np.concatenate(
        [xp[:, dt, df:df + f, :] for dt in range(3) for df in range(3)], axis=-1)
    out = np.matmul(patches.astype(T.ACC), weight) + bias
    return np.maximum(out, 0.0).astype(T.DTYPE)


def _tap_major(weight: np.ndarray) -> np.ndarray:
    """``(out, in*3*3)`` in (in, kt, kf) order -> ``(9*in, out)`` in (kt, kf, in) order."""
    c_out = weight.shape[0]
    c_in = weight.shape[1] // 9
    w = weight.astype(T.ACC).reshape(c_out, c_in, 3, 3).transpose(2, 3, 1, 0)
    return w.reshape(9 * c_in, c_out)


class StreamingFrontend:
    """Incremental VGG front-end: two (conv3x3, conv3x3, 2x2 max-pool) stages.

    Time is zero-padded by one step per convolution and pooled with ceil
    semantics (a trailing odd step is pooled alone); frequency is zero-padded
    per convolution and halved exactly by each pool. Output rows are the
    flattened ``(channel, freq)`` maps projected to the model width.

    Encoder frame ``k`` depends on raw frames ``4k-6 .. 4k+9`` and is emitted
    as soon as raw frame ``4k+9`` arrives (or at :meth:`finalize`).
    """

    def __init__(self, params: dict):
        c1 = params["frontend.conv1b.weight"].shape[0]
        c2 = params["frontend.conv2b.weight"].shape[0]
        bins = frontend_bins(params)
        self.bins = bins
        self._convs = [
            (_tap_major(params[f"frontend.conv{n}.weight"]),
             params[f"frontend.conv{n}.bias"].astype(T.ACC))
            for n in ("1a", "1b", "2a", "2b")
        ]
        self._proj_w = params["frontend.proj.weight"].astype(T.ACC)
        self._proj_b = params["frontend.proj.bias"].astype(T.ACC)
        # raw, conv1a, conv1b, pool1, conv2a, conv2b, pool2
        self._layers = [_Rows(bins, 1), _Rows(bins, c1), _Rows(bins, c1),
                        _Rows(bins // 2, c1), _Rows(bins // 2, c2), _Rows(bins // 2, c2),
                        _Rows(bins // 4, c2)]
        self._emitted = 0
        self.total_raw: Optional[int] = None

    def _lengths(self) -> Optional[list]:
        if self.total_raw is None:
            return None
        t0 = self.total_raw
        t1 = -(-t0 // 2)
        return [t0, t0, t0, t1, t1, t1, -(-t1 // 2)]

    def _advance_conv(self, i: int, weight, bias, lengths) -> None:
        src, dst = self._layers[i - 1], self._layers[i]
        limit = src.count - 1 if lengths is None else lengths[i]
        if limit <= dst.count:
            return
        pos = np.arange(dst.count, limit)
        valid = src.count if lengths is None else lengths[i - 1]
        x = src.gather(pos[:, None] + np.arange(-1, 2)[None, :], valid)
        dst.append(_conv_rows(x, weight, bias))
        src.drop_before(dst.count - 1)

    def _advance_pool(self, i: int, lengths) -> None:
        src, dst = self._layers[i - 1], self._layers[i]
        limit = src.count // 2 if lengths is None else lengths[i]
        if limit <= dst.count:
            return
        pos = np.arange(dst.count, limit)
        valid = src.count if lengths is None else lengths[i - 1]
        # missing partners are zero; ReLU outputs are >= 0 so the max is unchanged
        x = src.gather(2 * pos[:, None] + np.arange(2)[None, :], valid)
        n, _, f, c = x.shape
        dst.append(x.reshape(n, 2, f // 2, 2, c).max(axis=(1, 3)))
        src.drop_before(2 * dst.count)

    def _advance(self) -> np.ndarray:
        lengths = self._lengths()
        convs = iter(self._convs)
        for i in range(1, len(self._layers)):
            if i in (3, 6):
                self._advance_pool(i, lengths)
            else:
                self._advance_conv(i, *next(convs), lengths)
        top = self._layers[-1]
        new = top.data[self._emitted - top.offset:]
        self._emitted = top.count
        top.drop_before(top.count)
        if new.shape[0] == 0:
            return np.zeros((0, self._proj_w.shape[0]), dtype=T.DTYPE)
        flat = new.transpose(0, 2, 1).reshape(new.shape[0], 1, -1).astype(T.ACC)
        return (np.matmul(flat, self._proj_w.T)[:, 0, :] + self._proj_b).astype(T.DTYPE)

    def push(self, frames) -> np.ndarray:
        """Buffer raw frames; return any encoder frames that became computable."""
        if self.total_raw is not None:
            raise StreamStateError("front-end already finalized")
        x = T.as_matrix(frames, "features")
        if x.shape[1] != self.bins:
            raise ShapeError(f"features have {x.shape[1]} bins, front-end expects {self.bins}")
        self._layers[0].append(x[:, :, None])
        return self._advance()

    def finalize(self) -> np.ndarray:
        """Close the stream and flush the frames that depend on end padding."""
        if self.total_raw is not None:
            raise StreamStateError("front-end already finalized")
        self.total_raw = self._layers[0].count
        return self._advance()

    @property
    def frames_emitted(self) -> int:
        return self._emitted


def frontend_bins(params: dict) -> int:
    """Mel-bin count the front-end weights were built for."""
    return 4 * params["frontend.proj.weight"].shape[1] // params["frontend.conv2b.weight"].shape[0]


def vgg_subsample(features, params: dict) -> np.ndarray:
    """Offline front-end: ``(T, mel)`` features -> ``(ceil(ceil(T/2)/2), d)``."""
    x = T.as_matrix(features, "features")
    if x.shape[0] == 0:
        raise EmptyInputError("no feature frames")
    bins = frontend_bins(params)
    if x.shape[1] != bins:
        raise ShapeError(f"features have {x.shape[1]} bins, front-end expects {bins}")
    frontend = StreamingFrontend(params)
    return np.concatenate([frontend.push(x), frontend.finalize()], axis=0)


# ------------------------------------------------------------------ modules

def feed_forward_module(x, p: dict, eps: float = 1e-5) -> np.ndarray:
    """Macaron half-step: ``x + 0.5 * W2 swish(W1 LN(x))``."""
    h = T.layer_norm(x, p["norm.gain"], p["norm.bias"], eps)
    h = T.swish(T.linear(h, p["w1"], p["b1"]))
    h = T.linear(h, p["w2"], p["b2"])
    return (np.asarray(x, T.ACC) + 0.5 * h.astype(T.ACC)).astype(T.DTYPE)


def conv_module(x, p: dict, eps: float = 1e-5) -> np.ndarray:
    """Residual convolution branch over the rows of one segment only."""
    h = T.layer_norm(x, p["norm.gain"], p["norm.bias"], eps)
    h = T.glu(T.linear(h, p["pw1.weight"], p["pw1.bias"]))
    h = (T.depthwise_conv1d(h, p["dw.weight"]).astype(T.ACC) + p["dw.bias"]).astype(T.DTYPE)
    h = T.swish(T.layer_norm(h, p["dw_norm.gain"], p["dw_norm.bias"], eps))
    h = T.linear(h, p["pw2.weight"], p["pw2.bias"])
    return (np.asarray(x, T.ACC) + h.astype(T.ACC)).astype(T.DTYPE)


def _sub(params: dict, prefix: str) -> dict:
    return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}


@dataclass
class BlockParams:
    ffn1: dict
    ffn2: dict
    attn_norm: dict
    attn: AttentionWeights
    conv: Optional[dict]
    final_norm: dict

    @classmethod
    def from_params(cls, params: dict, index: int, heads: int) -> "BlockParams":
        p = _sub(params, f"layers.{index}.")
        a = _sub(p, "attn.")
        attn = AttentionWeights(
            wq=a["wq"], bq=a["bq"], wk=a["wk"], bk=a["bk"], wv=a["wv"], bv=a["bv"],
            wout=a["wout"], bout=a["bout"], position_bias=a["position_bias"], heads=heads)
        conv = _sub(p, "conv.") or None
        return cls(_sub(p, "ffn1."), _sub(p, "ffn2."), _sub(a, "norm."), attn, conv,
                   _sub(p, "final_norm."))


def conformer_block(seg: SegmentInput, mem: MemoryBank, block: BlockParams,
                    sup: SuppressionConfig, eps: float = 1e-5, trace: Optional[list] = None):
    """FFN/2 -> augmented-memory attention -> conv -> FFN/2 -> post layer norm.

    Returns the transformed segment (same row counts) and the advanced bank.
    The transformer variant (``block.conv is None``) skips the conv module.
    """
    n_left, n_center, _ = seg.sizes
    x = feed_forward_module(seg.rows(), block.ffn1, eps)
    normed = T.layer_norm(x, block.attn_norm["gain"], block.attn_norm["bias"], eps)
    attended, mem = augmem_layer_forward(
        SegmentInput.from_rows(normed, n_left, n_center), mem, block.attn, sup, trace)
    x = (x.astype(T.ACC) + attended.rows().astype(T.ACC)).astype(T.DTYPE)
    if block.conv is not None:
        x = conv_module(x, block.conv, eps)
    x = feed_forward_module(x, block.ffn2, eps)
    x = T.layer_norm(x, block.final_norm["gain"], block.final_norm["bias"], eps)
    return SegmentInput.from_rows(x, n_left, n_center), mem


@dataclass
class EncoderModel:
    """Immutable encoder weights plus the structures derived from them."""

    config: EncoderConfig
    params: dict
    blocks: list = field(init=False, repr=False)

    def __post_init__(self):
        expected = encoder_parameter_shapes(self.config)
        for name, shape in expected.items():
            if name not in self.params:
                raise ConfigError(f"missing encoder parameter {name}")
            if tuple(self.params[name].shape) != shape:
                raise ShapeError(f"{name}: expected {shape}, got {self.params[name].shape}")
        self.blocks = [BlockParams.from_params(self.params, i, self.config.heads)
                       for i in range(self.config.num_layers)]

    @classmethod
    def initialize(cls, config: EncoderConfig, seed: int = 0) -> "EncoderModel":
        return cls(config, init_parameters(encoder_parameter_shapes(config), seed))

    def new_memory(self) -> list[MemoryBank]:
        return [MemoryBank.empty(self.config.model_dim, self.config.memory_cap)
                for _ in range(self.config.num_layers)]

    def subsample(self, features) -> np.ndarray:
        return vgg_subsample(features, self.params)


@dataclass
class EncoderState:
    """Per-stream encoder state: one memory bank per layer."""

    banks: list
    traces: Optional[list] = None


def encoder_forward_segment(model: EncoderModel, state: EncoderState,
                            seg: SegmentInput) -> np.ndarray:
    """Run every layer on ``seg`` and return the top layer's center rows.

    Left/right context rows are carried through all layers and dropped only
    at the top, so the lookahead never grows with depth. Each layer's memory
    bank in ``state`` advances by one slot.
    """
    sup = model.config.suppression_config
    trace = [] if state.traces is not None else None
    for i, block in enumerate(model.blocks):
        seg, state.banks[i] = conformer_block(seg, state.banks[i], block, sup,
                                              model.config.norm_eps, trace)
    if trace is not None:
        state.traces.append(trace)
    return seg.center
