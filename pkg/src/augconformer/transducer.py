"""Transducer predictor, joiner, lattice loss and decoders.

Token ids ``0 .. vocab-1`` are targets, ``vocab`` is blank. The predictor owns
one extra embedding row (index ``vocab``) used as start-of-sequence; it is
never emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from . import tensor as T
from .errors import ShapeError

EMBED_DIM = 256
LSTM_HIDDEN = 320
JOINT_DIM = 640
DEFAULT_VOCAB = 1024


@dataclass(frozen=True)
class Vocab:
    size: int = DEFAULT_VOCAB

    @property
    def blank_id(self) -> int:
        return self.size

    @property
    def sos_id(self) -> int:
        return self.size

    @property
    def num_classes(self) -> int:
        return self.size + 1


def transducer_parameter_shapes(model_dim: int, vocab: Vocab = Vocab(),
                                embed_dim: int = EMBED_DIM, hidden: int = LSTM_HIDDEN,
                                joint_dim: int = JOINT_DIM) -> dict[str, tuple[int, ...]]:
    return {
        "predictor.embedding": (vocab.size + 1, embed_dim),
        "predictor.lstm.w_ih": (4 * hidden, embed_dim),
        "predictor.lstm.w_hh": (4 * hidden, hidden),
        "predictor.lstm.bias": (4 * hidden,),
        "predictor.proj.weight": (joint_dim, hidden),
        "predictor.proj.bias": (joint_dim,),
        "joiner.enc_proj.weight": (joint_dim, model_dim),
        "joiner.enc_proj.bias": (joint_dim,),
        "joiner.out.weight": (vocab.num_classes, joint_dim),
        "joiner.out.bias": (vocab.num_classes,),
    }


@dataclass(frozen=True)
class PredictorState:
    h: np.ndarray
    c: np.ndarray
    output: np.ndarray  # projected 640-d vector fed to the joiner


class Predictor:
    """Embedding -> single LSTM layer -> linear projection."""

    def __init__(self, params: dict, vocab: Vocab):
        self.vocab = vocab
        self.embedding = params["predictor.embedding"].astype(T.ACC)
        self.w_ih = params["predictor.lstm.w_ih"].astype(T.ACC)
        self.w_hh = params["predictor.lstm.w_hh"].astype(T.ACC)
        self.bias = params["predictor.lstm.bias"].astype(T.ACC)
        self.proj_w = params["predictor.proj.weight"].astype(T.ACC)
        self.proj_b = params["predictor.proj.bias"].astype(T.ACC)
        if self.embedding.shape[0] != vocab.size + 1:
            raise ShapeError("predictor embedding rows must be vocab size + 1")
        self.hidden = self.w_hh.shape[1]
        # input-side gate contributions for every embedding row, computed once
        self._input_gates = self.embedding @ self.w_ih.T + self.bias

    def _step(self, h: np.ndarray, c: np.ndarray, row: int) -> PredictorState:
        gates = self._input_gates[row] + self.w_hh @ h
        i, f, g, o = np.split(gates, 4)
        c = T.sigmoid(f) * c + T.sigmoid(i) * np.tanh(g)
        h = T.sigmoid(o) * np.tanh(c)
        return PredictorState(h, c, self.proj_w @ h + self.proj_b)

    def start(self) -> PredictorState:
        """State after consuming the start-of-sequence embedding."""
        zeros = np.zeros(self.hidden)
        return self._step(zeros, zeros, self.vocab.sos_id)

    def advance(self, state: PredictorState, token: int) -> PredictorState:
        if not 0 <= token < self.vocab.size:
            raise ValueError(f"token id {token} outside [0, {self.vocab.size})")
        return self._step(state.h, state.c, token)

    def forward(self, tokens: Sequence[int]) -> PredictorState:
        state = self.start()
        for t in tokens:
            state = self.advance(state, t)
        return state


def predictor_forward(predictor: Predictor, tokens: Sequence[int],
                      state: Optional[PredictorState] = None):
    """Return ``(g, state')`` after feeding ``tokens`` (from SOS if ``state`` is None)."""
    state = predictor.start() if state is None else state
    for t in tokens:
        state = predictor.advance(state, t)
    return state.output, state


class Joiner:
    """``log_softmax(W_out tanh(W_enc f + b_enc + g) + b_out)``."""

    def __init__(self, params: dict):
        self.enc_w = params["joiner.enc_proj.weight"].astype(T.ACC)
        self.enc_b = params["joiner.enc_proj.bias"].astype(T.ACC)
        self.out_w = params["joiner.out.weight"].astype(T.ACC)
        self.out_b = params["joiner.out.bias"].astype(T.ACC)

    def project_encoder(self, frames) -> np.ndarray:
        """Map encoder rows (``(n, d)``) into the joint space once per frame."""
        return np.asarray(frames, dtype=T.ACC) @ self.enc_w.T + self.enc_b

    def __call__(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Log-distribution over ``vocab + 1`` classes for one (frame, prefix) pair.

        ``f`` must already be projected by :meth:`project_encoder`.
        """
        return T.log_softmax(self.out_w @ np.tanh(f + g) + self.out_b)


def join(joiner: Joiner, f, g) -> np.ndarray:
    return joiner(joiner.project_encoder(np.atleast_2d(f))[0], np.asarray(g, dtype=T.ACC))


# ------------------------------------------------------------------ lattice

def lattice_log_probs(encoder_out, tokens: Sequence[int], predictor: Predictor,
                      joiner: Joiner) -> np.ndarray:
    """``(T, U+1, V+1)`` log-distributions for every lattice node."""
    f = joiner.project_encoder(encoder_out)
    states = [predictor.start()]
    for t in tokens:
        states.append(predictor.advance(states[-1], t))
    g = np.stack([s.output for s in states])
    h = np.tanh(f[:, None, :] + g[None, :, :])
    return T.log_softmax(h @ joiner.out_w.T + joiner.out_b)


def rnnt_forward(log_probs: np.ndarray, targets: Sequence[int], blank: int) -> np.ndarray:
    """Forward variables ``alpha[t, u]``: log-probability of reaching node (t, u)."""
    n_t, n_u1, _ = log_probs.shape
    alpha = np.full((n_t, n_u1), -np.inf)
    alpha[0, 0] = 0.0
    for t in range(n_t):
        for u in range(n_u1):
            if t == 0 and u == 0:
                continue
            stay = alpha[t - 1, u] + log_probs[t - 1, u, blank] if t > 0 else -np.inf
            emit = alpha[t, u - 1] + log_probs[t, u - 1, targets[u - 1]] if u > 0 else -np.inf
            alpha[t, u] = np.logaddexp(stay, emit)
    return alpha


def rnnt_backward(log_probs: np.ndarray, targets: Sequence[int], blank: int) -> np.ndarray:
    """Backward variables ``beta[t, u]``: log-probability of finishing from (t, u)."""
    n_t, n_u1, _ = log_probs.shape
    beta = np.full((n_t, n_u1), -np.inf)
    beta[n_t - 1, n_u1 - 1] = log_probs[n_t - 1, n_u1 - 1, blank]
    for t in range(n_t - 1, -1, -1):
        for u in range(n_u1 - 1, -1, -1):
            if t == n_t - 1 and u == n_u1 - 1:
                continue
            stay = beta[t + 1, u] + log_probs[t, u, blank] if t + 1 < n_t else -np.inf
            emit = (beta[t, u + 1] + log_probs[t, u, targets[u]]
                    if u + 1 < n_u1 else -np.inf)
            beta[t, u] = np.logaddexp(stay, emit)
    return beta


@dataclass
class RnntLattice:
    log_probs: np.ndarray
    targets: tuple
    blank: int
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)

    @property
    def log_likelihood(self) -> float:
        return float(self.beta[0, 0])


def rnnt_loss(log_probs, targets: Sequence[int], blank: Optional[int] = None):
    """Negative log-likelihood over all monotonic alignments, with its gradient.

    Args:
        log_probs: ``(T, U+1, V+1)`` per-node log-distributions.
        targets: ``U`` target ids, none equal to ``blank``.
        blank: blank index; defaults to the last class.

    Returns:
        ``(loss, grad, lattice)`` where ``grad`` is d loss / d log_probs with the
        entries of each node treated as free variables (nodes off every
        alignment path get 0).
    """
    lp = np.asarray(log_probs, dtype=T.ACC)
    if lp.ndim != 3:
        raise ShapeError(f"log_probs must be (T, U+1, V+1), got {lp.shape}")
    n_t, n_u1, n_cls = lp.shape
    blank = n_cls - 1 if blank is None else blank
    targets = tuple(int(t) for t in targets)
    if n_t < 1 or n_u1 != len(targets) + 1:
        raise ShapeError(f"lattice {lp.shape} does not fit {len(targets)} targets")
    for y in targets:
        if not 0 <= y < n_cls or y == blank:
            raise ValueError(f"invalid target id {y}")
    alpha = rnnt_forward(lp, targets, blank)
    beta = rnnt_backward(lp, targets, blank)
    log_z = alpha[-1, -1] + lp[-1, -1, blank]
    if not np.isfinite(log_z):
        raise FloatingPointError("lattice has no finite-probability alignment")
    grad = np.zeros_like(lp)
    # blank arcs (t, u) -> (t+1, u), plus the final blank out of (T-1, U)
    nxt = np.concatenate([beta[1:], np.zeros((1, n_u1))], axis=0)
    nxt[-1, :-1] = -np.inf
    grad[:, :, blank] = -np.exp(alpha + lp[:, :, blank] + nxt - log_z)
    if targets:
        ys = np.asarray(targets)
        emit = lp[:, :-1, :][:, np.arange(len(ys)), ys]
        grad[:, np.arange(len(ys)), ys] = -np.exp(alpha[:, :-1] + emit + beta[:, 1:] - log_z)
    lattice = RnntLattice(lp, targets, blank, alpha, beta)
    return float(-log_z), grad, lattice


# ------------------------------------------------------------------ decoding

class LmInterface(Protocol):
    def score(self, prefix: Sequence[int], token: int) -> float: ...

    def score_all(self, prefix: Sequence[int]) -> np.ndarray: ...


DEFAULT_MAX_SYMBOLS = 8
DEFAULT_LM_WEIGHT = 0.25


def greedy_decode(encoder_out, predictor: Predictor, joiner: Joiner,
                  max_symbols_per_frame: int = DEFAULT_MAX_SYMBOLS) -> list[int]:
    decoder = GreedyDecoder(predictor, joiner, max_symbols_per_frame)
    decoder.step(encoder_out)
    return decoder.tokens


class GreedyDecoder:
    """Frame-synchronous greedy search that can be fed frames incrementally."""

    def __init__(self, predictor: Predictor, joiner: Joiner,
                 max_symbols_per_frame: int = DEFAULT_MAX_SYMBOLS):
        if max_symbols_per_frame < 1:
            raise ValueError("max_symbols_per_frame must be >= 1")
        self.predictor = predictor
        self.joiner = joiner
        self.max_symbols = max_symbols_per_frame
        self.state = predictor.start()
        self.tokens: list[int] = []

    def step(self, frames) -> list[int]:
        """Consume encoder rows; return the tokens emitted for them."""
        blank = self.predictor.vocab.blank_id
        new = []
        for f in self.joiner.project_encoder(np.atleast_2d(frames)):
            for _ in range(self.max_symbols):
                k = int(np.argmax(self.joiner(f, self.state.output)))
                if k == blank:
                    break
                new.append(k)
                self.state = self.predictor.advance(self.state, k)
        self.tokens.extend(new)
        return new


@dataclass
class Hypothesis:
    tokens: tuple
    acoustic: float
    lm: float
    state: PredictorState = field(repr=False, compare=False)
    #: (frame, class id) per expansion; blank entries advance the frame
    alignment: tuple = ()

    def total(self, lm_weight: float) -> float:
        return self.acoustic + lm_weight * self.lm


def beam_decode(encoder_out, predictor: Predictor, joiner, beam: int = 4,
                lm: Optional[LmInterface] = None, lm_weight: float = DEFAULT_LM_WEIGHT,
                max_symbols_per_frame: int = DEFAULT_MAX_SYMBOLS,
                nbest: Optional[int] = None) -> list[Hypothesis]:
    """Frame-synchronous transducer beam search with optional shallow fusion.

    Per frame, active hypotheses are expanded up to ``max_symbols_per_frame``
    times. A blank expansion finishes the frame; a token expansion adds the
    token's log-probability plus ``lm_weight`` times the LM score and stays
    active. After each expansion round the union of finished hypotheses and
    fresh candidates is cut to ``beam`` entries. Hypotheses reaching the same
    token sequence are merged by keeping the better one. Hitting the symbol
    cap forces a blank. Ties break towards the lower token id, blank last.

    Returns hypotheses sorted best first (``nbest`` of them, default ``beam``).
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if lm_weight < 0:
        raise ValueError("lm_weight must be >= 0")
    blank = predictor.vocab.blank_id
    n_tokens = predictor.vocab.size
    hyps = [Hypothesis((), 0.0, 0.0, predictor.start())]
    # prefixes recur across frames and merged paths; advance each one only once
    states: dict[tuple, object] = {(): hyps[0].state}
    frames = joiner.project_encoder(np.atleast_2d(encoder_out)) if len(encoder_out) else []
    for t, f in enumerate(frames):
        active = hyps
        done: dict[tuple, Hypothesis] = {}
        for step in range(max_symbols_per_frame + 1):
            if not active:
                break
            cands = []  # (total, hyp index, class id, acoustic, lm)
            for hi, h in enumerate(active):
                lp = joiner(f, h.state.output)
                cands.append((h.total(lm_weight) + lp[blank], hi, blank,
                              h.acoustic + lp[blank], h.lm))
                if step == max_symbols_per_frame:
                    continue
                lm_scores = (lm.score_all(h.tokens) if lm is not None
                             else np.zeros(n_tokens))
                ac = h.acoustic + lp[:n_tokens]
                lmv = h.lm + lm_scores
                tot = ac + lm_weight * lmv
                keep = np.argsort(-tot, kind="stable")[:beam]
                cands.extend((tot[k], hi, int(k), ac[k], lmv[k]) for k in keep)
            pool = [(h.total(lm_weight), -1, blank, h) for h in done.values()]
            pool += [(c[0], c[1], c[2], c) for c in cands]
            pool.sort(key=lambda e: (-e[0], e[2], e[1]))
            next_active = []
            next_done: dict[tuple, Hypothesis] = {}
            for total, hi, k, payload in pool[:beam]:
                if hi < 0:
                    _merge(next_done, payload, lm_weight)
                    continue
                _, _, _, ac, lmv = payload
                h = active[hi]
                path = h.alignment + ((t, k),)
                if k == blank:
                    _merge(next_done, Hypothesis(h.tokens, ac, lmv, h.state, path), lm_weight)
                else:
                    tokens = h.tokens + (k,)
                    if tokens not in states:
                        states[tokens] = predictor.advance(h.state, k)
                    next_active.append(Hypothesis(tokens, ac, lmv, states[tokens], path))
            active, done = next_active, next_done
        hyps = sorted(done.values(), key=lambda h: (-h.total(lm_weight), h.tokens))
    hyps = sorted(hyps, key=lambda h: (-h.total(lm_weight), h.tokens))
    return hyps[: nbest or beam]


def _merge(pool: dict, hyp: Hypothesis, lm_weight: float) -> None:
    old = pool.get(hyp.tokens)
    if old is None or hyp.total(lm_weight) > old.total(lm_weight):
        pool[hyp.tokens] = hyp


def alignment_count(n_frames: int, n_targets: int) -> int:
    """Number of monotonic alignments through a ``T x (U+1)`` lattice."""
    return math.comb(n_frames + n_targets - 1, n_targets)
