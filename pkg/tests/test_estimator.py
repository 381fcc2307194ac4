import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from augconformer.estimator import StreamingEncoder, TransducerRecognizer
from augconformer.features import synth_features
from augconformer.streaming import encode
from augconformer.transducer import greedy_decode

TOY = dict(num_layers=1, model_dim=64, vgg_channels=(8, 16))


def test_encoder_params_and_clone():
    est = StreamingEncoder(**TOY, memory_cap=3, random_state=4)
    params = est.get_params()
    assert params["memory_cap"] == 3 and params["left"] == 16
    assert clone(est).get_params() == params


def test_encoder_transform():
    est = StreamingEncoder(**TOY)
    with pytest.raises(NotFittedError):
        est.transform([synth_features(0, 10)])
    est.fit()
    outs = est.transform([synth_features(0, 40), synth_features(1, 9)])
    assert [o.shape for o in outs] == [(10, 64), (3, 64)]
    assert np.array_equal(outs[0], encode(est.model_.encoder, synth_features(0, 40)))
    assert est.fit_transform([synth_features(0, 40)])[0].shape == (10, 64)


def test_encoder_input_validation():
    est = StreamingEncoder(**TOY).fit()
    with pytest.raises(ValueError):
        est.transform([np.zeros((5, 40))])
    with pytest.raises(ValueError):
        est.transform([np.full((5, 80), np.nan)])


def test_recognizer_greedy_and_beam(toy_model):
    feats = [synth_features(3, 60), synth_features(4, 90)]
    greedy = TransducerRecognizer(model=toy_model).fit()
    preds = greedy.predict(feats)
    for x, p in zip(feats, preds):
        assert p == greedy_decode(encode(toy_model.encoder, x), toy_model.predictor,
                                  toy_model.joiner)
    beam = TransducerRecognizer(model=toy_model, beam=3).fit()
    nb = beam.nbest(feats, 2)
    assert [len(h) for h in nb] == [2, 2]
    assert [list(h[0].tokens) for h in nb] == beam.predict(feats)


def test_recognizer_rejects_bad_beam(toy_model):
    with pytest.raises(ValueError):
        TransducerRecognizer(model=toy_model, beam=0).fit()
