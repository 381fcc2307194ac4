"""Streaming speech recognition with augmented-memory conformer transducers."""

from .attention import (MemoryBank, SegmentInput, SuppressionConfig, augmem_layer_forward,
                        weak_attention_suppress)
from .config import RunConfig
from .encoder import EncoderConfig, EncoderModel, subsampled_length, vgg_subsample
from .errors import (ConfigError, DegenerateRowError, EmptyInputError, FormatError, ShapeError,
                     StreamStateError)
from .estimator import StreamingEncoder, TransducerRecognizer
from .features import read_features, synth_features, write_features
from .lm import CountBigramLm, UniformLm
from .metrics import WerReport, compute_wer
from .model import TransducerModel, param_count
from .streaming import SegmenterConfig, StreamSession, bench_segment_costs, encode, lookahead_ms
from .transducer import (GreedyDecoder, Hypothesis, Vocab, beam_decode, greedy_decode,
                         rnnt_loss)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CountBigramLm", "DegenerateRowError", "EmptyInputError", "EncoderConfig",
    "EncoderModel", "FormatError", "GreedyDecoder", "Hypothesis", "MemoryBank", "RunConfig",
    "SegmentInput", "SegmenterConfig", "ShapeError", "StreamSession", "StreamStateError",
    "StreamingEncoder", "SuppressionConfig", "TransducerModel", "TransducerRecognizer",
    "UniformLm", "Vocab", "WerReport", "augmem_layer_forward", "beam_decode",
    "bench_segment_costs", "compute_wer", "encode", "greedy_decode", "lookahead_ms",
    "param_count", "read_features", "rnnt_loss", "subsampled_length", "synth_features",
    "vgg_subsample", "weak_attention_suppress", "write_features",
]
