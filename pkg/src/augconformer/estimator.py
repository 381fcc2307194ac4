"""scikit-learn style wrappers around the streaming encoder and the recognizer.

Nothing here is trained: ``fit`` builds seeded weights (or loads a weight
file) so the objects slot into sklearn tooling such as ``get_params`` and
``clone``. Inputs are lists of ``(frames, 80)`` feature matrices, one per
utterance, because utterance lengths differ.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .encoder import NUM_MEL_BINS, EncoderConfig
from .model import TransducerModel
from .streaming import StreamSession
from .transducer import Vocab, beam_decode, greedy_decode


def _check_utterances(X, num_bins: int = NUM_MEL_BINS) -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = [X]
    out = []
    for x in X:
        arr = check_array(x, dtype=np.float32, ensure_min_samples=1)
        if arr.shape[1] != num_bins:
            raise ValueError(f"expected {num_bins} feature bins, got {arr.shape[1]}")
        out.append(arr)
    return out


class StreamingEncoder(TransformerMixin, BaseEstimator):
    """Augmented-memory encoder as a transformer: features in, encoder rows out."""

    def __init__(self, variant: str = "conformer", size: str = "S", num_layers: Optional[int] = None,
                 model_dim: Optional[int] = None, left: int = 16, center: int = 32, right: int = 8,
                 gamma: float = 0.5, suppression: bool = True, memory_cap: Optional[int] = None,
                 vgg_channels: Optional[tuple] = None, random_state: int = 0):
        self.variant = variant
        self.size = size
        self.num_layers = num_layers
        self.model_dim = model_dim
        self.left = left
        self.center = center
        self.right = right
        self.gamma = gamma
        self.suppression = suppression
        self.memory_cap = memory_cap
        self.vgg_channels = vgg_channels
        self.random_state = random_state

    def _config(self) -> EncoderConfig:
        overrides = {k: v for k, v in dict(num_layers=self.num_layers, model_dim=self.model_dim,
                                            vgg_channels=self.vgg_channels).items() if v is not None}
        return EncoderConfig.preset(self.variant, self.size, left=self.left, center=self.center,
                                    right=self.right, gamma=self.gamma,
                                    suppression=self.suppression, memory_cap=self.memory_cap,
                                    **overrides)

    def fit(self, X=None, y=None):
        self.model_ = TransducerModel.initialize(self._config(), Vocab(), self.random_state)
        return self

    def transform(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [_encode(self.model_, x) for x in _check_utterances(X)]


def _encode(model: TransducerModel, features: np.ndarray) -> np.ndarray:
    session = StreamSession(model.encoder)
    return np.concatenate([session.push_features(features), session.finalize()], axis=0)


class TransducerRecognizer(BaseEstimator):
    """Streaming encoder plus greedy or beam decoding with optional LM fusion.

    ``predict`` returns one token-id list per utterance.
    """

    def __init__(self, model: Optional[TransducerModel] = None, beam: int = 1, lm=None,
                 lm_weight: float = 0.0, max_symbols_per_frame: int = 8, random_state: int = 0):
        self.model = model
        self.beam = beam
        self.lm = lm
        self.lm_weight = lm_weight
        self.max_symbols_per_frame = max_symbols_per_frame
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.beam < 1:
            raise ValueError("beam must be >= 1")
        self.model_ = (self.model if self.model is not None
                       else TransducerModel.initialize(EncoderConfig.preset(), Vocab(),
                                                       self.random_state))
        return self

    def _decode(self, x: np.ndarray, nbest: Optional[int] = None):
        enc = _encode(self.model_, x)
        m = self.model_
        if self.beam == 1 and self.lm is None:
            return greedy_decode(enc, m.predictor, m.joiner, self.max_symbols_per_frame), None
        hyps = beam_decode(enc, m.predictor, m.joiner, self.beam, self.lm, self.lm_weight,
                           self.max_symbols_per_frame, nbest)
        return list(hyps[0].tokens), hyps

    def predict(self, X) -> list[list[int]]:
        check_is_fitted(self, "model_")
        return [self._decode(x)[0] for x in _check_utterances(X)]

    def nbest(self, X, n: Optional[int] = None) -> list[list]:
        """Scored hypotheses per utterance, best first."""
        check_is_fitted(self, "model_")
        out = []
        for x in _check_utterances(X):
            tokens, hyps = self._decode(x, n)
            if hyps is None:
                enc = _encode(self.model_, x)
                hyps = beam_decode(enc, self.model_.predictor, self.model_.joiner, 1,
                                   max_symbols_per_frame=self.max_symbols_per_frame)
            out.append(hyps)
        return out


def transcribe(recognizer: TransducerRecognizer, X, id_to_token: Sequence[str]) -> list[str]:
    return [" ".join(id_to_token[t] for t in toks) for toks in recognizer.predict(X)]
