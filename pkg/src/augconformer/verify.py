"""Named verification suites behind ``augconformer verify``.

Each suite returns a :class:`SuiteReport` made of independent named checks.
Suites are deterministic: every random draw comes from a fixed seed.
"""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import oracles
from . import tensor as T
from .attention import (MemoryBank, SegmentInput, SuppressionConfig, augmem_layer_forward,
                        build_key_value, build_query, weak_attention_suppress)
from .encoder import EncoderConfig, EncoderModel, StreamingFrontend, subsampled_length
from .features import synth_features
from .lm import CountBigramLm
from .model import TransducerModel, param_count
from .streaming import SegmenterConfig, StreamSession, bench_segment_costs, lookahead_ms
from .transducer import (GreedyDecoder, Vocab, alignment_count, beam_decode, greedy_decode,
                         rnnt_loss)


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class SuiteReport:
    suite: str
    checks: list
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "checks": [{"name": c.name, "passed": bool(c.passed), **_jsonable(c.detail)}
                       for c in self.checks],
        }


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = v
    return out


def toy_encoder_config(num_layers: int = 2, **overrides) -> EncoderConfig:
    """Desk-scale conformer: width 64, narrow VGG, default 16/32/8 segmentation."""
    base = dict(num_layers=num_layers, model_dim=64, heads=4, conv_kernel=32,
                vgg_channels=(8, 16))
    return EncoderConfig(**{**base, **overrides})


def _random_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, d)).astype(T.DTYPE)


# ------------------------------------------------------------------ suites

def suite_params() -> list[Check]:
    counts = {(v, s): param_count(EncoderConfig.preset(v, s))
              for v in ("conformer", "transformer") for s in ("S", "M")}
    checks = []
    for size, target in (("S", 10.3e6), ("M", 27.9e6)):
        n = counts[("conformer", size)]
        checks.append(Check(f"conformer_{size}_within_10pct", abs(n - target) <= 0.1 * target,
                            {"count": n, "target": target, "rel": (n - target) / target}))
    for size in ("S", "M"):
        a, b = counts[("transformer", size)], counts[("conformer", size)]
        checks.append(Check(f"transformer_{size}_matches_conformer_size",
                            abs(a - b) <= 0.1 * b, {"transformer": a, "conformer": b}))
    return checks


def suite_lookahead() -> list[Check]:
    ms = lookahead_ms(SegmenterConfig())
    return [Check("default_320ms", ms == 320, {"ms": ms}),
            Check("right_0", lookahead_ms(SegmenterConfig(right=0)) == 0),
            Check("right_4", lookahead_ms(SegmenterConfig(right=4)) == 160)]


def _probability_rows(rng: np.random.Generator, count: int):
    for _ in range(count):
        n = int(rng.integers(2, 513))
        scale = float(rng.choice([0.1, 1.0, 3.0, 10.0]))
        logits = rng.standard_normal(n) * scale
        p = np.exp(logits - logits.max())
        yield p / p.sum()


def suite_was(rows: int = 1000, seed: int = 0) -> list[Check]:
    gammas = (0.0, 0.25, 0.5, 1.0)
    rng = np.random.Generator(np.random.PCG64(seed))
    worst_sum = 0.0
    zero_ok = argmax_ok = mono_ok = True
    for p in _probability_rows(rng, rows):
        survivors = []
        for g in gammas:
            out = weak_attention_suppress(p, g)
            theta = min(p.mean() - g * p.std(), p.max())
            worst_sum = max(worst_sum, abs(out.sum() - 1.0))
            zero_ok &= bool(np.all(out[p < theta] == 0.0) and np.all(out[p >= theta] > 0.0))
            argmax_ok &= bool(out[np.argmax(p)] > 0.0)
            survivors.append(set(np.flatnonzero(out)))
        mono_ok &= all(survivors[i] <= survivors[i + 1] for i in range(len(gammas) - 1))
    hand = weak_attention_suppress(np.array([0.4, 0.3, 0.2, 0.1]), 0.5)
    expected = np.array([0.4, 0.3, 0.2, 0.0]) / 0.9
    return [
        Check("rows_sum_to_one", worst_sum <= 1e-6, {"max_abs_dev": worst_sum, "rows": rows}),
        Check("suppressed_entries_exactly_zero", zero_ok),
        Check("argmax_survives", argmax_ok),
        Check("gamma_monotone_survivors", mono_ok),
        Check("hand_vector_gamma_0.5", float(np.abs(hand - expected).max()) <= 1e-4,
              {"got": hand.round(4).tolist()}),
    ]


def suite_attention(cases: int = 20, seed: int = 0) -> list[Check]:
    """Dense equivalence, renormalisation oracle, query isolation, key length."""
    rng = np.random.Generator(np.random.PCG64(seed))
    model = EncoderModel.initialize(toy_encoder_config(1), seed)
    w = model.blocks[0].attn
    off = SuppressionConfig(0.5, enabled=False)
    worst = 0.0
    for _ in range(cases):
        left, center, right = (int(rng.integers(0, 17)), int(rng.integers(1, 33)),
                               int(rng.integers(0, 9)))
        x = _random_rows(rng, left + center + right, w.dim)
        out, _ = augmem_layer_forward(SegmentInput.from_rows(x, left, center),
                                      MemoryBank.empty(w.dim), w, off)
        ref = oracles.dense_attention(x, w.wq, w.bq, w.wk, w.bk, w.wv, w.bv, w.wout, w.bout,
                                      w.heads, w.position_bias)
        worst = max(worst, float(np.abs(out.rows() - ref).max()))
    checks = [Check("dense_equivalence", worst <= 1e-5, {"max_abs_err": worst, "cases": cases})]

    # renormalisation: suppressed probabilities equal a fresh softmax over survivors
    seg = SegmentInput.from_rows(_random_rows(rng, 56, w.dim), 16, 32)
    mem = MemoryBank(_random_rows(rng, 3, w.dim))
    trace: list = []
    augmem_layer_forward(seg, mem, w, SuppressionConfig(0.5), trace)
    probs = trace[0].probs
    q = build_query(seg, w)
    k, _ = build_key_value(seg, mem, w)
    from .attention import position_bias_logits
    bias = position_bias_logits(w.position_bias, 56, 3)
    dh = w.dim // w.heads
    err = 0.0
    for h in range(w.heads):
        cols = slice(h * dh, (h + 1) * dh)
        logits = q[:, cols] @ k[:, cols].T / math.sqrt(dh) + bias[h]
        for i in range(logits.shape[0]):
            raw = np.exp(logits[i] - logits[i].max())
            raw /= raw.sum()
            ref = oracles.suppress_by_resoftmax(logits[i], raw, 0.5)
            err = max(err, float(np.abs(probs[h, i] - ref).max()))
    checks.append(Check("suppression_matches_resoftmax", err <= 1e-6, {"max_abs_err": err}))
    checks.append(Check("post_suppression_rows_sum_to_one",
                        float(np.abs(probs.sum(-1) - 1).max()) <= 1e-6))

    # memory never enters the query
    q_a = build_query(seg, w)
    other = MemoryBank(_random_rows(rng, 3, w.dim))
    k_a, _ = build_key_value(seg, mem, w)
    k_b, _ = build_key_value(seg, other, w)
    checks.append(Check("query_isolation", np.array_equal(q_a, build_query(seg, w))
                        and not np.array_equal(k_a, k_b)))
    bank, grew = MemoryBank.empty(w.dim), True
    for n in range(1, 6):
        _, bank = augmem_layer_forward(seg, bank, w, SuppressionConfig(0.5))
        grew &= len(bank) == n
    checks.append(Check("memory_grows_one_slot_per_segment", grew))
    checks.append(Check("key_length_formula", trace[0].key_rows == 3 + 56 and
                        trace[0].query_rows == 57, {"key_rows": trace[0].key_rows}))
    return checks


def suite_memory(num_segments: int = 20, seed: int = 0) -> list[Check]:
    checks = []
    base = EncoderModel.initialize(toy_encoder_config(2), seed)
    seg_cfg = SegmenterConfig.from_encoder(base.config)
    frames = _random_rows(np.random.Generator(np.random.PCG64(seed)),
                          num_segments * seg_cfg.center, base.config.model_dim)
    for cap in (None, 0, 10):
        model = EncoderModel(base.config.with_(memory_cap=cap), base.params)
        session = StreamSession(model)
        session.push_encoder_frames(frames)
        session.finalize()
        limit = math.inf if cap is None else cap
        slots_ok = all(rec.memory_slots == [min(rec.index, limit)] * model.config.num_layers
                       for rec in session.segments)
        keys_ok = all(rec.key_length == min(rec.index - 1, limit) + rec.n_left
                      + rec.n_center + rec.n_right for rec in session.segments)
        checks.append(Check(f"session_slots_cap_{cap}", slots_ok and
                            len(session.segments) == num_segments))
        checks.append(Check(f"session_key_length_cap_{cap}", keys_ok))
        report = bench_segment_costs(base, num_segments, cap, seed)
        span = seg_cfg.span
        bench_ok = all(r.key_length == min(r.segment - 1, limit) + span and
                       r.memory_slots == min(r.segment, limit) for r in report)
        checks.append(Check(f"bench_key_length_cap_{cap}", bench_ok,
                            {"key_lengths": [r.key_length for r in report]}))
    return checks


def suite_subsample(max_frames: int = 1000) -> list[Check]:
    """Emitted length for every utterance length 1..max_frames.

    One front-end is fed a frame at a time; after each frame a copy is
    finalised, which gives the length an utterance ending there would have.
    """
    tiny = EncoderModel.initialize(
        EncoderConfig(num_layers=1, model_dim=4, heads=1, conv_kernel=1, vgg_channels=(1, 1)), 0)
    fe = StreamingFrontend(tiny.params)
    frame = np.zeros((1, tiny.config.num_mel_bins), dtype=T.DTYPE)
    emitted, bad = 0, []
    for n in range(1, max_frames + 1):
        emitted += fe.push(frame).shape[0]
        produced = emitted + copy.deepcopy(fe).finalize().shape[0]
        if produced != subsampled_length(n) or produced != math.ceil(math.ceil(n / 2) / 2):
            bad.append(n)
    return [Check("length_law_exhaustive", not bad, {"checked": max_frames, "failures": bad[:10]})]


def _segment_outputs(session: StreamSession, rows: np.ndarray) -> list[np.ndarray]:
    out, pos = [], 0
    for rec in session.segments:
        out.append(rows[pos:pos + rec.n_center])
        pos += rec.n_center
    return out


def suite_causality(layer_counts=(1, 4, 16), perturbations: int = 200,
                    raw_perturbations: int = 10, seed: int = 0) -> list[Check]:
    """Perturb frames past a segment's right context; that segment must not move."""
    checks = []
    rng = np.random.Generator(np.random.PCG64(seed))
    for layers in layer_counts:
        model = EncoderModel.initialize(toy_encoder_config(layers), seed + layers)
        cfg = SegmenterConfig.from_encoder(model.config)
        n_frames = 4 * cfg.center + cfg.right
        frames = _random_rows(rng, n_frames, model.config.model_dim)
        base = StreamSession(model)
        base_rows = np.concatenate([base.push_encoder_frames(frames), base.finalize()])
        base_out = _segment_outputs(base, base_rows)
        ends = [rec.start + rec.n_center + rec.n_right for rec in base.segments]
        violations = compared = 0
        for _ in range(perturbations):
            pos = int(rng.integers(cfg.center + cfg.right, n_frames))
            bumped = frames.copy()
            bumped[pos] += rng.uniform(-1.0, 1.0, size=frames.shape[1]).astype(T.DTYPE)
            session = StreamSession(model)
            # frames up to and including the perturbed one: every segment whose
            # right context ends at or before ``pos`` gets computed
            rows = session.push_encoder_frames(bumped[:pos + 1])
            for i, seg_rows in enumerate(_segment_outputs(session, rows)):
                if ends[i] <= pos:
                    compared += 1
                    violations += not np.array_equal(seg_rows, base_out[i])
        # power check: touching the last right-context frame of segment 1 must matter
        inside = frames.copy()
        inside[ends[0] - 1] += 1.0
        probe = StreamSession(model)
        probe_rows = probe.push_encoder_frames(inside)
        sensitive = not np.array_equal(_segment_outputs(probe, probe_rows)[0], base_out[0])
        checks.append(Check(f"encoder_frames_layers_{layers}", violations == 0 and compared > 0,
                            {"perturbations": perturbations, "segments_compared": compared,
                             "violations": violations}))
        checks.append(Check(f"right_context_is_read_layers_{layers}", sensitive))

        if raw_perturbations and layers <= 4:
            raw = synth_features(seed + layers, 4 * n_frames)
            ref = StreamSession(model)
            ref_rows = np.concatenate([ref.push_features(raw), ref.finalize()])
            ref_out = _segment_outputs(ref, ref_rows)
            raw_viol = 0
            for _ in range(raw_perturbations):
                target = int(rng.integers(0, 3))
                rec = ref.segments[target]
                first_free = 4 * (rec.start + rec.n_center + rec.n_right) + 6
                pos = int(rng.integers(first_free, raw.shape[0]))
                bumped = raw.copy()
                bumped[pos] += 1.0
                s = StreamSession(model)
                rows = np.concatenate([s.push_features(bumped), s.finalize()])
                raw_viol += not all(np.array_equal(a, b) for a, b in
                                    zip(_segment_outputs(s, rows)[:target + 1],
                                        ref_out[:target + 1]))
            checks.append(Check(f"raw_frames_layers_{layers}", raw_viol == 0,
                                {"perturbations": raw_perturbations, "violations": raw_viol}))
    return checks


def suite_chunking(utterances: int = 50, seed: int = 0) -> list[Check]:
    model = EncoderModel.initialize(toy_encoder_config(2), seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    mismatched, conserved = [], True
    for u in range(utterances):
        n = int(rng.integers(50, 1001))
        feats = synth_features(seed * 1000 + u, n)
        whole = StreamSession(model)
        a = np.concatenate([whole.push_features(feats), whole.finalize()])
        single = StreamSession(model)
        b = np.concatenate([single.push_features(feats[i:i + 1]) for i in range(n)]
                           + [single.finalize()])
        if a.shape != b.shape or not np.array_equal(a, b):
            mismatched.append(u)
        conserved &= a.shape[0] == subsampled_length(n)
    return [Check("frame_by_frame_equals_one_push", not mismatched,
                  {"utterances": utterances, "mismatched": mismatched}),
            Check("emitted_rows_equal_encoder_frames", conserved)]


def suite_rnnt(seeds: int = 5, vocab: int = 4, lattices: int = 10, seed: int = 0) -> list[Check]:
    rng = np.random.Generator(np.random.PCG64(seed))
    blank = vocab
    worst = 0.0
    for n_t in range(1, 5):
        for n_u in range(0, 4):
            for _ in range(seeds):
                lp = T.log_softmax(rng.standard_normal((n_t, n_u + 1, vocab + 1)) * 2)
                tg = rng.integers(0, vocab, n_u).tolist()
                loss, _, _ = rnnt_loss(lp, tg, blank)
                worst = max(worst, abs(loss - oracles.brute_force_rnnt_loss(lp, tg, blank)))
    closed = 0.0
    for n_t in range(1, 5):
        for n_u in range(0, 4):
            lp = np.full((n_t, n_u + 1, vocab + 1), -math.log(vocab + 1))
            loss, _, _ = rnnt_loss(lp, [0] * n_u, blank)
            expected = -(math.log(alignment_count(n_t, n_u)) - (n_t + n_u) * math.log(vocab + 1))
            closed = max(closed, abs(loss - expected))
    grad_err = 0.0
    for _ in range(lattices):
        n_t, n_u = int(rng.integers(1, 5)), int(rng.integers(0, 4))
        lp = T.log_softmax(rng.standard_normal((n_t, n_u + 1, vocab + 1)))
        tg = rng.integers(0, vocab, n_u).tolist()
        _, grad, _ = rnnt_loss(lp, tg, blank)
        num = oracles.central_differences(lambda x: rnnt_loss(x, tg, blank)[0], lp, 1e-4)
        rel = np.abs(grad - num) / np.maximum(np.maximum(np.abs(grad), np.abs(num)), 1e-8)
        grad_err = max(grad_err, float(rel.max()))
    # summed alignment probability never exceeds 1; with a blank-only
    # vocabulary there is a single path carrying all the mass
    excess = 0.0
    for n_t in range(1, 5):
        for n_u in range(0, 4):
            lp = T.log_softmax(rng.standard_normal((n_t, n_u + 1, vocab + 1)))
            tg = rng.integers(0, vocab, n_u).tolist()
            excess = max(excess, math.exp(-rnnt_loss(lp, tg, blank)[0]) - 1.0)
    lone = rnnt_loss(np.zeros((3, 1, 1)), [], 0)[0]
    return [
        Check("dp_matches_enumeration", worst <= 1e-6, {"max_abs_err": worst}),
        Check("probability_conservation", excess <= 1e-12 and abs(lone) <= 1e-12,
              {"max_excess": excess, "blank_only_loss": lone}),
        Check("uniform_closed_form", closed <= 1e-9,
              {"max_abs_err": closed, "paths": "C(T+U-1, U)"}),
        Check("gradient_matches_finite_differences", grad_err <= 1e-3,
              {"max_rel_err": grad_err, "lattices": lattices}),
    ]


class _ScriptState:
    def __init__(self, prefix: tuple):
        self.output = prefix


class _ScriptedPredictor:
    """Predictor stand-in whose "output" is the prefix itself."""

    vocab = Vocab(3)

    def start(self):
        return _ScriptState(())

    def advance(self, state, token):
        return _ScriptState(state.output + (token,))


class _ScriptedJoiner:
    """Joiner stand-in reading log-probabilities from a (frame, prefix) table."""

    def __init__(self, table: dict, default):
        self.table = table
        self.default = np.log(np.asarray(default, dtype=float))

    def project_encoder(self, frames):
        return np.asarray(frames)

    def __call__(self, f, prefix):
        p = self.table.get((int(f[0]), tuple(prefix)))
        return self.default if p is None else np.log(np.asarray(p, dtype=float))


def tie_lattice():
    """Two frames where "a c" beats "a b" by a hair acoustically (a=0, b=1, c=2)."""
    table = {
        (0, ()): [0.90, 0.03, 0.02, 0.05],
        (0, (0,)): [0.04, 0.03, 0.03, 0.90],
        (1, (0,)): [0.02, 0.44, 0.46, 0.08],
        (1, (0, 1)): [0.03, 0.03, 0.04, 0.90],
        (1, (0, 2)): [0.03, 0.03, 0.04, 0.90],
    }
    frames = np.array([[0.0], [1.0]])
    return frames, _ScriptedPredictor(), _ScriptedJoiner(table, [0.02, 0.02, 0.02, 0.94])


def replay_acoustic(hyp, encoder_out, predictor, joiner) -> float:
    """Recompute a hypothesis' acoustic score from its stored alignment."""
    f = joiner.project_encoder(np.atleast_2d(encoder_out))
    state, total = predictor.start(), 0.0
    for t, k in hyp.alignment:
        total += joiner(f[t], state.output)[k]
        if k != predictor.vocab.blank_id:
            state = predictor.advance(state, k)
    return total


def toy_transducer(seed: int = 0, blank_bias: float = 2.5) -> TransducerModel:
    """Randomly initialised transducer whose joiner leans towards blank.

    Without the bias an untrained joiner emits a token at nearly every
    expansion and every frame runs into the symbol cap.
    """
    model = TransducerModel.initialize(toy_encoder_config(1), Vocab(1024), seed)
    params = dict(model.params)
    bias = params["joiner.out.bias"].copy()
    bias[model.vocab.blank_id] += blank_bias
    params["joiner.out.bias"] = bias
    return TransducerModel.from_params(model.config, model.vocab, params)


def suite_decoder(utterances: int = 20, frames: int = 12, seed: int = 0) -> list[Check]:
    model = toy_transducer(seed)
    pred, joiner = model.predictor, model.joiner
    rng = np.random.Generator(np.random.PCG64(seed))
    inputs = [rng.uniform(-2, 2, size=(frames, 64)) for _ in range(utterances)]
    bigram = CountBigramLm.from_sentences(
        [rng.integers(0, 1024, 20).tolist() for _ in range(50)], 1024)

    greedy_eq = fusion0_eq = streaming_eq = True
    for x in inputs:
        g = greedy_decode(x, pred, joiner)
        b = beam_decode(x, pred, joiner, beam=1, lm=None, lm_weight=0.0)
        greedy_eq &= list(b[0].tokens) == g
        plain = beam_decode(x, pred, joiner, beam=3, lm=None, lm_weight=0.0)
        fused = beam_decode(x, pred, joiner, beam=3, lm=bigram, lm_weight=0.0)
        fusion0_eq &= ([(h.tokens, h.acoustic) for h in plain]
                       == [(h.tokens, h.total(0.0)) for h in fused])
        inc = GreedyDecoder(pred, joiner)
        for row in x:
            inc.step(row[None, :])
        streaming_eq &= inc.tokens == g

    additive, monotone = 0.0, True
    for x in inputs[:5]:
        hyps = beam_decode(x, pred, joiner, beam=3, lm=bigram, lm_weight=0.25)
        for h in hyps:
            lm_sum = sum(bigram.score(h.tokens[:i], tok) for i, tok in enumerate(h.tokens))
            acoustic = replay_acoustic(h, x, pred, joiner)
            additive = max(additive, abs(h.total(0.25) - (acoustic + 0.25 * lm_sum)))
        tops = [beam_decode(x, pred, joiner, beam=w, lm=bigram)[0].total(0.25)
                for w in range(1, 5)]
        monotone &= all(tops[i + 1] >= tops[i] - 1e-12 for i in range(3))

    frames_tie, spred, sjoin = tie_lattice()
    lm = CountBigramLm.from_sentences([[0, 1]] * 3, 3)
    before = beam_decode(frames_tie, spred, sjoin, beam=4, lm=None, lm_weight=0.0)[0].tokens
    after = beam_decode(frames_tie, spred, sjoin, beam=4, lm=lm, lm_weight=0.25)[0].tokens

    return [
        Check("beam1_equals_greedy", greedy_eq, {"utterances": utterances}),
        Check("lambda0_fusion_equals_plain", fusion0_eq),
        Check("tie_flips_with_bigram", before == (0, 2) and after == (0, 1),
              {"without_lm": list(before), "with_lm": list(after)}),
        Check("fusion_additivity", additive <= 1e-9, {"max_abs_err": additive}),
        Check("beam_monotone_top1", monotone),
        Check("greedy_streaming_equals_offline", streaming_eq),
    ]


def suite_tensor(seed: int = 0) -> list[Check]:
    rng = np.random.Generator(np.random.PCG64(seed))
    a, b, c = (rng.uniform(-1, 1, s) for s in ((5, 7), (7, 4), (4, 6)))
    assoc = float(np.abs(T.matmul(T.matmul(a, b), c) - T.matmul(a, T.matmul(b, c))).max())
    worst = 0.0
    for n in (1, 2, 17, 512, 4096):
        rows = rng.standard_normal((4, n)) * 20
        worst = max(worst, float(np.abs(T.softmax_rows(rows).astype(np.float64).sum(1) - 1).max()))
    x = rng.standard_normal((6, 10))
    g, bias = rng.standard_normal(10), rng.standard_normal(10)
    shift = float(np.abs(T.layer_norm(x, g, bias) - T.layer_norm(x + 3.5, g, bias)).max())
    k = rng.standard_normal((10, 5))
    y = rng.standard_normal((6, 10))
    lin = float(np.abs(T.depthwise_conv1d(x + y, k)
                       - (T.depthwise_conv1d(x, k) + T.depthwise_conv1d(y, k))).max())
    return [Check("matmul_associative", assoc <= 1e-5, {"max_abs_err": assoc}),
            Check("softmax_rows_sum_to_one", worst <= 1e-6, {"max_abs_dev": worst}),
            Check("layer_norm_shift_invariant", shift <= 1e-6, {"max_abs_err": shift}),
            Check("depthwise_conv_linear", lin <= 1e-6, {"max_abs_err": lin})]


def suite_encoder(seed: int = 0) -> list[Check]:
    """Block shapes, determinism, variant ablation and session isolation."""
    from .encoder import EncoderState, conformer_block, encoder_forward_segment

    rng = np.random.Generator(np.random.PCG64(seed))
    checks = []
    for variant in ("conformer", "transformer"):
        model = EncoderModel.initialize(toy_encoder_config(2, variant=variant), seed)
        seg = SegmentInput.from_rows(_random_rows(rng, 56, 64), 16, 32)
        mem = MemoryBank.empty(64)
        out, new_mem = conformer_block(seg, mem, model.blocks[0], model.config.suppression_config,
                                       model.config.norm_eps)
        checks.append(Check(f"{variant}_block_shape", out.sizes == (16, 32, 8)
                            and out.rows().shape == (56, 64) and len(new_mem) == 1))
        a = encoder_forward_segment(model, EncoderState(model.new_memory()), seg)
        b = encoder_forward_segment(model, EncoderState(model.new_memory()), seg)
        checks.append(Check(f"{variant}_deterministic", np.array_equal(a, b)))

    model = EncoderModel.initialize(toy_encoder_config(2), seed)
    feats = [synth_features(seed + i, 300 + 40 * i) for i in range(2)]
    solo = []
    for f in feats:
        s = StreamSession(model)
        solo.append(np.concatenate([s.push_features(f), s.finalize()]))
    sessions = [StreamSession(model) for _ in feats]
    outs = [[], []]
    for start in range(0, 400, 7):
        for i, (sess, f) in enumerate(zip(sessions, feats)):
            if start < f.shape[0]:
                outs[i].append(sess.push_features(f[start:start + 7]))
    for i, sess in enumerate(sessions):
        outs[i].append(sess.finalize())
    checks.append(Check("interleaved_sessions_match_solo",
                        all(np.array_equal(np.concatenate(o), r) for o, r in zip(outs, solo))))
    return checks


def suite_harness(seed: int = 0) -> list[Check]:
    """Config round trip, WER arithmetic and synthetic-data determinism."""
    from .config import RunConfig
    from .metrics import compute_wer

    cfg = RunConfig.from_json('{"model": {"size": "M"}, "memory_cap": 4, "gamma": 0.25}')
    again = RunConfig.from_json(cfg.to_json())
    wer_ok = (compute_wer("a b c".split(), "a b c".split()).wer == 0.0
              and abs(compute_wer("a b c".split(), "a x c".split()).wer - 1 / 3) < 1e-12
              and compute_wer("a b".split(), []).wer == 1.0)
    a, b = synth_features(seed, 50), synth_features(seed, 50)
    return [Check("config_round_trip", again == cfg and again.to_json() == cfg.to_json()),
            Check("wer_examples", wer_ok),
            Check("synth_deterministic", np.array_equal(a, b) and a.shape == (50, 80)
                  and not np.array_equal(a, synth_features(seed + 1, 50)))]


SUITES: dict[str, Callable[[], list]] = {
    "tensor": suite_tensor,
    "was": suite_was,
    "attention": suite_attention,
    "memory": suite_memory,
    "subsample": suite_subsample,
    "causality": suite_causality,
    "chunking": suite_chunking,
    "rnnt": suite_rnnt,
    "decoder": suite_decoder,
    "encoder": suite_encoder,
    "harness": suite_harness,
    "params": suite_params,
    "lookahead": suite_lookahead,
}


def run_suite(name: str) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    t0 = time.perf_counter()
    checks = SUITES[name]()
    return SuiteReport(name, checks, time.perf_counter() - t0)


def run_suites(names: Optional[list] = None) -> list[SuiteReport]:
    return [run_suite(n) for n in sorted(names or SUITES)]
