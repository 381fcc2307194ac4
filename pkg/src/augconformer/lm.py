"""External language models for shallow fusion."""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Sequence

import numpy as np


class UniformLm:
    """Every token gets ``-ln(vocab_size)``."""

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size
        self._logp = -math.log(vocab_size)

    def score(self, prefix: Sequence[int], token: int) -> float:
        return self._logp

    def score_all(self, prefix: Sequence[int]) -> np.ndarray:
        return np.full(self.vocab_size, self._logp)


class CountBigramLm:
    """Add-one smoothed bigram model over token ids.

    ``P(b | a) = (count(a, b) + 1) / (count(a, .) + V)``, where ``a`` is the
    last token of the prefix, or a sentence-start history for an empty prefix.
    """

    START = -1

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size
        self._pairs: Counter = Counter()
        self._history: Counter = Counter()
        self._cache: dict[int, np.ndarray] = {}

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sequence[int]], vocab_size: int) -> "CountBigramLm":
        lm = cls(vocab_size)
        for sent in sentences:
            prev = cls.START
            for tok in sent:
                if not 0 <= tok < vocab_size:
                    raise ValueError(f"token id {tok} outside vocabulary")
                lm._pairs[prev, tok] += 1
                lm._history[prev] += 1
                prev = tok
        return lm

    @classmethod
    def from_text(cls, lines: Iterable[str], token_ids: dict[str, int]) -> "CountBigramLm":
        """Train on whitespace-tokenised lines; words missing from ``token_ids`` are skipped."""
        sentences = [[token_ids[w] for w in line.split() if w in token_ids] for line in lines]
        return cls.from_sentences(sentences, len(token_ids))

    def _row(self, prefix: Sequence[int]) -> np.ndarray:
        prev = prefix[-1] if len(prefix) else self.START
        row = self._cache.get(prev)
        if row is None:
            counts = np.ones(self.vocab_size)
            for (a, b), n in self._pairs.items():
                if a == prev:
                    counts[b] += n
            row = np.log(counts) - math.log(self._history[prev] + self.vocab_size)
            self._cache[prev] = row
        return row

    def score(self, prefix: Sequence[int], token: int) -> float:
        return float(self._row(prefix)[token])

    def score_all(self, prefix: Sequence[int]) -> np.ndarray:
        return self._row(prefix)
