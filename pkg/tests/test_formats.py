import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augconformer.config import RunConfig
from augconformer.encoder import EncoderConfig
from augconformer.errors import FormatError
from augconformer.features import read_features, synth_features, write_features
from augconformer.model import TransducerModel, param_count
from augconformer.transducer import Vocab
from augconformer.verify import toy_encoder_config


# ------------------------------------------------------------ features

def test_feature_round_trip(tmp_path):
    x = synth_features(4, 37)
    write_features(tmp_path / "a.feat", x)
    assert np.array_equal(read_features(tmp_path / "a.feat"), x)
    raw = (tmp_path / "a.feat").read_bytes()
    assert raw[:4] == b"FEAT" and struct.unpack("<III", raw[4:16]) == (1, 37, 80)


@pytest.mark.parametrize("mutate", [
    lambda b: b"JUNK" + b[4:],
    lambda b: b[:4] + struct.pack("<I", 2) + b[8:],
    lambda b: b[:-4],
    lambda b: b[:10],
])
def test_feature_corruption(tmp_path, mutate):
    write_features(tmp_path / "a.feat", synth_features(4, 5))
    (tmp_path / "b.feat").write_bytes(mutate((tmp_path / "a.feat").read_bytes()))
    with pytest.raises(FormatError):
        read_features(tmp_path / "b.feat")


def test_feature_width_check(tmp_path):
    write_features(tmp_path / "a.feat", np.zeros((3, 64)))
    with pytest.raises(FormatError):
        read_features(tmp_path / "a.feat")
    assert read_features(tmp_path / "a.feat", num_bins=None).shape == (3, 64)


def test_synth_golden_values():
    x = synth_features(0, 3)
    assert x.shape == (3, 80) and x.dtype == np.float32
    np.testing.assert_array_equal(x[0, :4], np.float32(
        [0.21046829223632812, -0.7620795369148254, -0.21473874151706696, -0.9174676537513733]))
    np.testing.assert_array_equal(x[2, -2:], np.float32([-3.360179901123047, -3.49173903465271]))


def test_synth_seeds():
    assert np.array_equal(synth_features(8, 20), synth_features(8, 20))
    assert not np.array_equal(synth_features(8, 20), synth_features(9, 20))
    with pytest.raises(ValueError):
        synth_features(0, 0)


# ------------------------------------------------------------ weights

def test_weight_file_round_trip(tmp_path):
    cfg = toy_encoder_config(1, memory_cap=5)
    model = TransducerModel.initialize(cfg, Vocab(32), seed=5)
    model.save(tmp_path / "m.scrt")
    back = TransducerModel.load(tmp_path / "m.scrt")
    assert back.config == cfg and back.vocab == Vocab(32)
    assert all(np.array_equal(back.params[k], v) for k, v in model.params.items())
    assert back.num_parameters() == param_count(cfg, Vocab(32))


def test_weight_file_corruption(tmp_path):
    model = TransducerModel.initialize(toy_encoder_config(1), Vocab(8), seed=5)
    model.save(tmp_path / "m.scrt")
    raw = (tmp_path / "m.scrt").read_bytes()
    for i, bad in enumerate([b"XXXX" + raw[4:], raw[:-3], raw[:20], raw[:-100]]):
        (tmp_path / f"b{i}.scrt").write_bytes(bad)
        with pytest.raises(FormatError):
            TransducerModel.load(tmp_path / f"b{i}.scrt")


def test_parameter_counts_match_construction():
    cfg = EncoderConfig.preset("conformer", "S")
    model = TransducerModel.initialize(cfg)
    assert model.num_parameters() == param_count(cfg) == 9_981_553
    assert abs(param_count(EncoderConfig.preset("conformer", "M")) - 27.9e6) <= 2.79e6


# ------------------------------------------------------------ run config

def test_config_defaults():
    cfg = RunConfig()
    enc = cfg.encoder_config()
    assert (enc.left, enc.center, enc.right, enc.gamma) == (16, 32, 8, 0.5)
    assert cfg.decode.lm_weight == 0.25
    assert enc == EncoderConfig.preset("conformer", "S")


@pytest.mark.parametrize("text", [
    '{"unknown": 1}',
    '{"model": {"size": "XL"}}',
    '{"segment": {"subsample_factor": 2}}',
    '{"gamma": -0.5}',
    '{"segment": {"center": 0}}',
    '{"decode": {"mode": "sampling"}}',
])
def test_config_rejects(text):
    with pytest.raises(ValueError):
        RunConfig.from_json(text)


configs = st.builds(
    lambda size, variant, left, right, gamma, cap, mode, seed: json.dumps({
        "model": {"size": size, "variant": variant},
        "segment": {"left": left, "right": right},
        "gamma": gamma, "memory_cap": cap, "decode": {"mode": mode}, "seed": seed}),
    st.sampled_from(["S", "M"]), st.sampled_from(["conformer", "transformer"]),
    st.integers(0, 32), st.integers(0, 16), st.floats(0, 4), st.none() | st.integers(0, 50),
    st.sampled_from(["greedy", "beam", "fusion"]), st.integers(0, 2**31))


@settings(max_examples=50, deadline=None)
@given(configs)
def test_config_round_trip(text):
    cfg = RunConfig.from_json(text)
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg and again.to_json() == cfg.to_json()
