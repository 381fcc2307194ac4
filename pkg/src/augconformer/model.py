"""Full transducer model (encoder + predictor + joiner) and its weight file.

Weight file layout, all integers little-endian::

    magic         4 bytes  b"SCRT"
    version       u32      (1)
    config_len    u32      byte length of the config block
    config        bytes    UTF-8 JSON: {"encoder": {...}, "vocab_size": int}
    records       until end of file, each:
        name_len  u16
        name      name_len bytes, UTF-8
        rows      u32
        cols      u32
        data      rows * cols little-endian f32, row-major

Vectors are stored as ``rows = 1``. Loading restores every parameter to its
in-memory shape, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, EncoderModel, encoder_parameter_shapes, init_parameters
from .errors import FormatError
from .transducer import Joiner, Predictor, Vocab, transducer_parameter_shapes

MAGIC = b"SCRT"
VERSION = 1


def model_parameter_shapes(cfg: EncoderConfig, vocab: Vocab = Vocab()) -> dict:
    return {**encoder_parameter_shapes(cfg),
            **transducer_parameter_shapes(cfg.model_dim, vocab)}


def param_count(cfg: EncoderConfig, vocab: Vocab = Vocab()) -> int:
    """Exact parameter total of encoder, predictor and joiner."""
    return sum(int(np.prod(s)) for s in model_parameter_shapes(cfg, vocab).values())


@dataclass
class TransducerModel:
    encoder: EncoderModel
    vocab: Vocab
    params: dict = field(repr=False)

    def __post_init__(self):
        self.predictor = Predictor(self.params, self.vocab)
        self.joiner = Joiner(self.params)

    @classmethod
    def initialize(cls, cfg: EncoderConfig, vocab: Vocab = Vocab(), seed: int = 0) -> "TransducerModel":
        params = init_parameters(model_parameter_shapes(cfg, vocab), seed)
        return cls.from_params(cfg, vocab, params)

    @classmethod
    def from_params(cls, cfg: EncoderConfig, vocab: Vocab, params: dict) -> "TransducerModel":
        expected = model_parameter_shapes(cfg, vocab)
        missing = set(expected) - set(params)
        extra = set(params) - set(expected)
        if missing or extra:
            raise FormatError(f"parameter mismatch: missing {sorted(missing)[:3]}, "
                              f"unexpected {sorted(extra)[:3]}")
        return cls(EncoderModel(cfg, params), vocab, params)

    @property
    def config(self) -> EncoderConfig:
        return self.encoder.config

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def save(self, path) -> None:
        header = json.dumps({"encoder": self.config.to_dict(),
                             "vocab_size": self.vocab.size}, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC + struct.pack("<II", VERSION, len(header)) + header)
            for name, value in self.params.items():
                data = np.asarray(value, dtype="<f4")
                rows, cols = (1, data.shape[0]) if data.ndim == 1 else data.shape
                encoded = name.encode()
                fh.write(struct.pack("<H", len(encoded)) + encoded)
                fh.write(struct.pack("<II", rows, cols))
                fh.write(np.ascontiguousarray(data).tobytes())

    @classmethod
    def load(cls, path) -> "TransducerModel":
        raw = Path(path).read_bytes()
        if raw[:4] != MAGIC:
            raise FormatError(f"{path}: bad magic {raw[:4]!r}")
        try:
            version, cfg_len = struct.unpack_from("<II", raw, 4)
            if version != VERSION:
                raise FormatError(f"{path}: unsupported version {version}")
            meta = json.loads(raw[12:12 + cfg_len])
            cfg = EncoderConfig(**meta["encoder"])
            vocab = Vocab(meta["vocab_size"])
            shapes = model_parameter_shapes(cfg, vocab)
            pos = 12 + cfg_len
            params = {}
            while pos < len(raw):
                (name_len,) = struct.unpack_from("<H", raw, pos)
                name = raw[pos + 2:pos + 2 + name_len].decode()
                rows, cols = struct.unpack_from("<II", raw, pos + 2 + name_len)
                pos += 2 + name_len + 8
                n_bytes = 4 * rows * cols
                if pos + n_bytes > len(raw):
                    raise FormatError(f"{path}: record {name!r} truncated")
                data = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=pos)
                pos += n_bytes
                shape = shapes.get(name, (rows, cols))
                params[name] = data.astype(np.float32).reshape(shape)
        except (struct.error, KeyError, TypeError, ValueError, UnicodeDecodeError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"{path}: malformed weight file ({exc})") from exc
        return cls.from_params(cfg, vocab, params)
