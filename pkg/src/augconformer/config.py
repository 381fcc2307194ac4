"""JSON run configuration with strict validation.

Defaults are the streaming setup this engine targets: 16/32/8 left/center/
right encoder frames, suppression gamma 0.5 and LM weight 0.25.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .encoder import SUBSAMPLE_FACTOR, EncoderConfig
from .streaming import SegmenterConfig
from .transducer import DEFAULT_LM_WEIGHT, DEFAULT_MAX_SYMBOLS, DEFAULT_VOCAB, Vocab


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Strict):
    variant: Literal["conformer", "transformer"] = "conformer"
    size: Literal["S", "M"] = "S"
    # optional overrides of the preset, for desk-scale runs
    num_layers: Optional[int] = Field(None, ge=1)
    model_dim: Optional[int] = Field(None, ge=1)
    heads: Optional[int] = Field(None, ge=1)
    conv_kernel: Optional[int] = Field(None, ge=1)
    ffn_expansion: int = Field(4, ge=1)
    vgg_channels: Optional[tuple[int, int]] = None


class SegmentSection(_Strict):
    left: int = Field(16, ge=0)
    center: int = Field(32, ge=1)
    right: int = Field(8, ge=0)
    subsample_factor: int = SUBSAMPLE_FACTOR
    frame_shift_ms: float = Field(10.0, gt=0)

    @field_validator("subsample_factor")
    @classmethod
    def _fixed_factor(cls, v: int) -> int:
        if v != SUBSAMPLE_FACTOR:
            raise ValueError(f"the VGG front-end subsamples by {SUBSAMPLE_FACTOR}")
        return v


class DecodeSection(_Strict):
    mode: Literal["greedy", "beam", "fusion"] = "greedy"
    beam: int = Field(4, ge=1)
    lm_weight: float = Field(DEFAULT_LM_WEIGHT, ge=0)
    max_symbols_per_frame: int = Field(DEFAULT_MAX_SYMBOLS, ge=1)


class PathsSection(_Strict):
    weights: Optional[str] = None
    lm: Optional[str] = None
    tokens: Optional[str] = None


class RunConfig(_Strict):
    model: ModelSection = ModelSection()
    segment: SegmentSection = SegmentSection()
    gamma: float = Field(0.5, ge=0, allow_inf_nan=False)
    suppression: bool = True
    memory_cap: Optional[int] = Field(None, ge=0)
    decode: DecodeSection = DecodeSection()
    vocab_size: int = Field(DEFAULT_VOCAB, ge=1)
    seed: int = 0
    paths: PathsSection = PathsSection()

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.model_validate_json(text)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)

    def encoder_config(self) -> EncoderConfig:
        m = self.model
        overrides = {k: v for k, v in dict(
            num_layers=m.num_layers, model_dim=m.model_dim, heads=m.heads,
            conv_kernel=m.conv_kernel, vgg_channels=m.vgg_channels).items() if v is not None}
        return EncoderConfig.preset(
            m.variant, m.size, ffn_expansion=m.ffn_expansion,
            left=self.segment.left, center=self.segment.center, right=self.segment.right,
            gamma=self.gamma, suppression=self.suppression, memory_cap=self.memory_cap,
            **overrides)

    def segmenter_config(self) -> SegmenterConfig:
        s = self.segment
        return SegmenterConfig(s.left, s.center, s.right, s.subsample_factor, s.frame_shift_ms)

    def vocab(self) -> Vocab:
        return Vocab(self.vocab_size)
