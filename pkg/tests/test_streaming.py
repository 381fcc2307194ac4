import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augconformer.errors import ShapeError, StreamStateError
from augconformer.features import synth_features
from augconformer.streaming import (SegmenterConfig, StreamSession, bench_segment_costs, encode,
                                    lookahead_ms)


def frames(n, d=64, seed=0):
    return np.random.Generator(np.random.PCG64(seed)).uniform(-1, 1, (n, d)).astype(np.float32)


def layout(session):
    return [(r.start, r.n_left, r.n_center, r.n_right) for r in session.segments]


def test_lookahead_examples():
    assert lookahead_ms(SegmenterConfig()) == 320
    assert lookahead_ms(SegmenterConfig(right=0)) == 0
    assert lookahead_ms(SegmenterConfig(right=4)) == 160


def test_sixty_four_frames(toy_encoder):
    s = StreamSession(toy_encoder)
    assert s.push_encoder_frames(frames(64)).shape == (32, 64)
    assert layout(s) == [(0, 0, 32, 8)]
    assert s.finalize().shape == (32, 64)
    assert layout(s) == [(0, 0, 32, 8), (32, 16, 32, 0)]


def test_one_center_then_finalize(toy_encoder):
    s = StreamSession(toy_encoder)
    assert s.push_encoder_frames(frames(32)).shape == (0, 64)
    assert s.finalize().shape == (32, 64)
    assert layout(s) == [(0, 0, 32, 0)]


def test_partial_tail(toy_encoder):
    s = StreamSession(toy_encoder)
    s.push_encoder_frames(frames(35))
    s.finalize()
    assert layout(s) == [(0, 0, 32, 3), (32, 16, 3, 0)]


def test_empty_session_finalize(toy_encoder):
    s = StreamSession(toy_encoder)
    assert s.finalize().shape == (0, 64)
    assert s.segments == []


def test_session_state_errors(toy_encoder):
    s = StreamSession(toy_encoder)
    s.push_encoder_frames(frames(3))
    with pytest.raises(StreamStateError):
        s.push_features(synth_features(0, 10))
    s.finalize()
    with pytest.raises(StreamStateError):
        s.finalize()
    with pytest.raises(StreamStateError):
        s.push_encoder_frames(frames(3))
    with pytest.raises(ShapeError):
        StreamSession(toy_encoder).push_encoder_frames(frames(3, d=5))


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 150), st.lists(st.integers(1, 40), min_size=1, max_size=12))
def test_any_partition_of_encoder_frames(toy_encoder, n, cuts):
    x = frames(n, seed=n)
    whole = StreamSession(toy_encoder)
    a = np.concatenate([whole.push_encoder_frames(x), whole.finalize()])
    s, parts, pos = StreamSession(toy_encoder), [], 0
    for c in cuts + [n]:
        parts.append(s.push_encoder_frames(x[pos:pos + c]))
        pos += c
        if pos >= n:
            break
    parts.append(s.finalize())
    b = np.concatenate(parts)
    assert a.shape == (n, 64) and np.array_equal(a, b)
    assert all(r.n_center == 32 for r in s.segments[:-1])


def test_feature_chunks_and_conservation(toy_encoder):
    feats = synth_features(2, 333)
    ref = encode(toy_encoder, feats)
    assert ref.shape == (84, 64)
    s = StreamSession(toy_encoder)
    out = [s.push_features(feats[i:i + 13]) for i in range(0, 333, 13)] + [s.finalize()]
    assert np.array_equal(np.concatenate(out), ref)
    assert s.frames_received == 84


def test_memory_law_with_cap(toy_encoder):
    from augconformer.encoder import EncoderModel
    for cap in (None, 0, 3):
        model = EncoderModel(toy_encoder.config.with_(memory_cap=cap), toy_encoder.params)
        s = StreamSession(model)
        s.push_encoder_frames(frames(32 * 6))
        s.finalize()
        for r in s.segments:
            expect = r.index if cap is None else min(r.index, cap)
            assert r.memory_slots == [expect] * model.config.num_layers


def test_bench_key_lengths(toy_encoder):
    assert [r.key_length for r in bench_segment_costs(toy_encoder, 5)] == [56, 57, 58, 59, 60]
    assert {r.key_length for r in bench_segment_costs(toy_encoder, 5, memory_cap=0)} == {56}
    capped = bench_segment_costs(toy_encoder, 14, memory_cap=10)
    assert [r.key_length for r in capped[10:]] == [66] * 4
    with pytest.raises(ValueError):
        bench_segment_costs(toy_encoder, 0)


def test_sessions_do_not_share_state(toy_encoder):
    a, b = synth_features(1, 200), synth_features(2, 260)
    solo_a, solo_b = encode(toy_encoder, a), encode(toy_encoder, b)
    sa, sb = StreamSession(toy_encoder), StreamSession(toy_encoder)
    outs_a, outs_b = [], []
    for i in range(0, 260, 9):
        outs_a.append(sa.push_features(a[i:i + 9]))
        outs_b.append(sb.push_features(b[i:i + 9]))
    outs_a.append(sa.finalize())
    outs_b.append(sb.finalize())
    assert np.array_equal(np.concatenate(outs_a), solo_a)
    assert np.array_equal(np.concatenate(outs_b), solo_b)
