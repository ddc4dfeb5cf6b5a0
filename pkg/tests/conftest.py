import numpy as np
import pytest
from hypothesis import settings

from phonekit import LogProbMatrix, default_table

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def table():
    return default_table()


def random_log_matrix(rng: np.random.Generator, frames: int, vocab: int) -> LogProbMatrix:
    """A well-formed random log-prob matrix (rows normalize exactly enough)."""
    raw = rng.gamma(shape=1.0, scale=1.0, size=(frames, vocab)) + 1e-3
    probs = raw / raw.sum(axis=1, keepdims=True)
    return LogProbMatrix.from_probs(probs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
