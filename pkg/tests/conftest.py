import numpy as np
import pytest

from augconformer.encoder import EncoderModel
from augconformer.verify import toy_encoder_config, toy_transducer


@pytest.fixture(scope="session")
def toy_encoder():
    return EncoderModel.initialize(toy_encoder_config(2), seed=7)


@pytest.fixture(scope="session")
def toy_model():
    return toy_transducer(seed=3)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
