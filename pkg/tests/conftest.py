import numpy as np
import pytest

from cfguide.vocab import Vocabulary


@pytest.fixture
def small_vocab():
    return Vocabulary.build([
        "what", "is", "in", "the", "scan", "shows", "free", "air", "under",
        "diaphragm", "yes", "no", "true", "false", "q", "good", "bad", "?", ".",
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
