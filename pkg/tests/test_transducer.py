import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augconformer import oracles
from augconformer import tensor as T
from augconformer.errors import ShapeError
from augconformer.lm import CountBigramLm, UniformLm
from augconformer.transducer import (GreedyDecoder, Joiner, Predictor, Vocab, alignment_count,
                                     beam_decode, greedy_decode, lattice_log_probs,
                                     predictor_forward, rnnt_loss, transducer_parameter_shapes)
from augconformer.verify import _ScriptedPredictor, replay_acoustic, tie_lattice


def test_vocab_layout():
    v = Vocab()
    assert (v.size, v.blank_id, v.num_classes) == (1024, 1024, 1025)
    shapes = transducer_parameter_shapes(144, v)
    assert shapes["predictor.embedding"] == (1025, 256)
    assert shapes["joiner.out.weight"] == (1025, 640)


# ------------------------------------------------------------ predictor

def test_predictor_deterministic_and_recurrent(toy_model):
    p = toy_model.predictor
    g1, _ = predictor_forward(p, [5, 9, 2])
    g2, _ = predictor_forward(p, [5, 9, 2])
    assert np.array_equal(g1, g2)
    _, state = predictor_forward(p, [5, 9])
    g3, _ = predictor_forward(p, [2], state)
    assert np.array_equal(g1, g3)
    with pytest.raises(ValueError):
        p.advance(p.start(), 1024)


def test_zero_predictor_outputs_bias(toy_model):
    params = {k: (np.zeros_like(v) if k.startswith("predictor.") and k != "predictor.proj.bias"
                  else v) for k, v in toy_model.params.items()}
    p = Predictor(params, toy_model.vocab)
    np.testing.assert_allclose(predictor_forward(p, [3, 4])[0], params["predictor.proj.bias"])


# ------------------------------------------------------------ joiner

def test_zero_output_weights_give_uniform(toy_model, rng):
    params = dict(toy_model.params)
    params["joiner.out.weight"] = np.zeros_like(params["joiner.out.weight"])
    params["joiner.out.bias"] = np.zeros_like(params["joiner.out.bias"])
    j = Joiner(params)
    lp = j(j.project_encoder(rng.standard_normal((1, 64)))[0], rng.standard_normal(640))
    np.testing.assert_allclose(lp, -math.log(1025))


def test_joiner_normalised_and_saturation_safe(toy_model, rng):
    j = toy_model.joiner
    for scale in (1.0, 1e6):
        f = j.project_encoder(rng.standard_normal((1, 64)) * scale)[0]
        lp = j(f, rng.standard_normal(640) * scale)
        assert np.all(np.isfinite(lp))
        assert abs(np.exp(lp).sum() - 1.0) <= 1e-6


def test_lattice_shape(toy_model, rng):
    lp = lattice_log_probs(rng.standard_normal((4, 64)), [1, 2, 3], toy_model.predictor,
                           toy_model.joiner)
    assert lp.shape == (4, 4, 1025)


# ------------------------------------------------------------ loss

def test_single_node_lattice():
    lp = T.log_softmax(np.array([[[0.3, -1.0, 2.0]]]))
    assert rnnt_loss(lp, [])[0] == pytest.approx(-lp[0, 0, 2], abs=1e-12)


def test_three_by_two_matches_enumeration(rng):
    lp = T.log_softmax(rng.standard_normal((3, 3, 5)))
    # the closing blank is fixed, so 2 labels are placed among 4 free arcs
    assert len(list(oracles.enumerate_alignments(3, [1, 2], 4))) == math.comb(4, 2)
    assert rnnt_loss(lp, [1, 2], 4)[0] == pytest.approx(
        oracles.brute_force_rnnt_loss(lp, [1, 2], 4), abs=1e-9)


@pytest.mark.parametrize("n_t,n_u", [(t, u) for t in range(1, 6) for u in range(0, 5)])
def test_alignment_count_matches_enumeration(n_t, n_u):
    assert alignment_count(n_t, n_u) == len(list(oracles.enumerate_alignments(n_t, [0] * n_u, 1)))


@pytest.mark.parametrize("n_t,n_u,v", [(1, 0, 4), (2, 1, 4), (4, 3, 4), (3, 2, 7)])
def test_uniform_lattice_closed_form(n_t, n_u, v):
    lp = np.full((n_t, n_u + 1, v + 1), -math.log(v + 1))
    expected = -math.log(alignment_count(n_t, n_u)) + (n_t + n_u) * math.log(v + 1)
    assert rnnt_loss(lp, [0] * n_u, v)[0] == pytest.approx(expected, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3), st.integers(0, 2**31))
def test_dp_matches_enumeration(n_t, n_u, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    lp = T.log_softmax(rng.standard_normal((n_t, n_u + 1, 5)) * 3)
    tg = rng.integers(0, 4, n_u).tolist()
    loss, _, lattice = rnnt_loss(lp, tg, 4)
    assert abs(loss - oracles.brute_force_rnnt_loss(lp, tg, 4)) <= 1e-6
    assert lattice.log_likelihood == pytest.approx(-loss, abs=1e-9)
    assert math.exp(-loss) <= 1.0 + 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2), st.integers(0, 2**31))
def test_gradient_matches_central_differences(n_t, n_u, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    lp = rng.standard_normal((n_t, n_u + 1, 4))
    tg = rng.integers(0, 3, n_u).tolist()
    _, grad, _ = rnnt_loss(lp, tg, 3)
    num = oracles.central_differences(lambda x: rnnt_loss(x, tg, 3)[0], lp)
    rel = np.abs(grad - num) / np.maximum(np.maximum(np.abs(grad), np.abs(num)), 1e-8)
    assert rel.max() <= 1e-3


def test_loss_input_errors():
    lp = np.zeros((2, 2, 3))
    with pytest.raises(ShapeError):
        rnnt_loss(np.zeros((2, 3)), [])
    with pytest.raises(ShapeError):
        rnnt_loss(lp, [])
    with pytest.raises(ValueError):
        rnnt_loss(lp, [2])
    with pytest.raises(ValueError):
        rnnt_loss(lp, [7])


# ------------------------------------------------------------ greedy

class TableJoiner:
    """``fn(frame, prefix) -> probabilities``; frames are plain indices."""

    def __init__(self, fn):
        self.fn = fn

    def project_encoder(self, frames):
        return np.asarray(frames, dtype=float)

    def __call__(self, f, prefix):
        return np.log(np.asarray(self.fn(int(f[0]), prefix), dtype=float))


def frame_ids(n):
    return np.arange(n, dtype=float)[:, None]


def test_greedy_blank_always_wins():
    j = TableJoiner(lambda t, pre: [0.1, 0.1, 0.1, 0.7])
    assert greedy_decode(frame_ids(5), _ScriptedPredictor(), j) == []


def test_greedy_one_token_per_frame_and_symbol_cap():
    once = TableJoiner(lambda t, pre: [0.05, 0.8, 0.05, 0.1] if len(pre) <= t else [0.1, 0.1, 0.1, 0.7])
    assert greedy_decode(frame_ids(6), _ScriptedPredictor(), once) == [1] * 6
    always = TableJoiner(lambda t, pre: [0.05, 0.8, 0.05, 0.1])
    assert greedy_decode(frame_ids(3), _ScriptedPredictor(), always, 4) == [1] * 12
    with pytest.raises(ValueError):
        GreedyDecoder(_ScriptedPredictor(), always, 0)


def test_greedy_incremental_equals_offline(toy_model, rng):
    x = rng.uniform(-2, 2, (15, 64))
    full = greedy_decode(x, toy_model.predictor, toy_model.joiner)
    dec = GreedyDecoder(toy_model.predictor, toy_model.joiner)
    emitted = []
    for lo in range(0, 15, 4):
        emitted += dec.step(x[lo:lo + 4])
    assert emitted == full == dec.tokens


# ------------------------------------------------------------ beam

def random_table(seed, n_tokens=3):
    rng = np.random.Generator(np.random.PCG64(seed))
    cache = {}

    def fn(t, prefix):
        key = (t, tuple(prefix))
        if key not in cache:
            p = rng.dirichlet(np.ones(n_tokens + 1))
            p[-1] += 0.5
            cache[key] = p / p.sum()
        return cache[key]
    return fn


def test_beam_one_without_lm_is_greedy(toy_model, rng):
    for _ in range(3):
        x = rng.uniform(-2, 2, (10, 64))
        g = greedy_decode(x, toy_model.predictor, toy_model.joiner)
        b = beam_decode(x, toy_model.predictor, toy_model.joiner, beam=1, lm_weight=0.0)
        assert list(b[0].tokens) == g


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 4))
def test_beam_one_is_greedy_on_random_lattices(seed, n_frames, cap):
    j = TableJoiner(random_table(seed))
    g = greedy_decode(frame_ids(n_frames), _ScriptedPredictor(), j, cap)
    b = beam_decode(frame_ids(n_frames), _ScriptedPredictor(), j, 1, None, 0.0, cap)
    assert list(b[0].tokens) == g


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.floats(0.0, 2.0))
def test_fusion_additivity(seed, n_frames, lam):
    pred, j = _ScriptedPredictor(), TableJoiner(random_table(seed))
    lm = CountBigramLm.from_sentences([[0, 1, 2], [1, 1], [2, 0]], 3)
    for h in beam_decode(frame_ids(n_frames), pred, j, 3, lm, lam, 3):
        lm_sum = sum(lm.score(h.tokens[:i], k) for i, k in enumerate(h.tokens))
        acoustic = replay_acoustic(h, frame_ids(n_frames), pred, j)
        assert h.acoustic == pytest.approx(acoustic, abs=1e-9)
        assert h.total(lam) == pytest.approx(acoustic + lam * lm_sum, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4))
def test_zero_weight_fusion_changes_nothing(seed, n_frames):
    pred, j = _ScriptedPredictor(), TableJoiner(random_table(seed))
    lm = CountBigramLm.from_sentences([[0, 1, 2], [1, 1]], 3)
    plain = beam_decode(frame_ids(n_frames), pred, j, 3, None, 0.0, 3)
    fused = beam_decode(frame_ids(n_frames), pred, j, 3, lm, 0.0, 3)
    assert [(h.tokens, h.acoustic) for h in plain] == [(h.tokens, h.total(0.0)) for h in fused]


def test_bigram_breaks_acoustic_tie():
    frames, pred, joiner = tie_lattice()
    lm = CountBigramLm.from_sentences([[0, 1]] * 3, 3)
    assert beam_decode(frames, pred, joiner, 4)[0].tokens == (0, 2)
    assert beam_decode(frames, pred, joiner, 4, lm, 0.25)[0].tokens == (0, 1)
    # a uniform LM charges every token alike, so it cannot separate the two
    uniform = beam_decode(frames, pred, joiner, 4, UniformLm(3), 0.25)
    assert uniform[0].tokens == (0, 2)


def test_beam_monotone_on_fixed_inputs(toy_model, rng):
    x = rng.uniform(-2, 2, (10, 64))
    tops = [beam_decode(x, toy_model.predictor, toy_model.joiner, w)[0].acoustic
            for w in range(1, 5)]
    assert all(b >= a - 1e-12 for a, b in zip(tops, tops[1:]))


def test_beam_results_sorted_and_unique():
    pred, j = _ScriptedPredictor(), TableJoiner(random_table(9))
    hyps = beam_decode(frame_ids(4), pred, j, beam=5, nbest=5)
    totals = [h.total(0.25) for h in hyps]
    assert totals == sorted(totals, reverse=True)
    assert len({h.tokens for h in hyps}) == len(hyps)


def test_beam_argument_errors():
    pred, j = _ScriptedPredictor(), TableJoiner(random_table(0))
    with pytest.raises(ValueError):
        beam_decode(frame_ids(2), pred, j, beam=0)
    with pytest.raises(ValueError):
        beam_decode(frame_ids(2), pred, j, lm_weight=-1.0)


def test_empty_input_decodes_to_nothing():
    pred, j = _ScriptedPredictor(), TableJoiner(random_table(0))
    assert beam_decode(np.zeros((0, 1)), pred, j)[0].tokens == ()
    assert greedy_decode(np.zeros((0, 1)), pred, j) == []
