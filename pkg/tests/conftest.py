import numpy as np
import pytest

from rsshash.store import length_normalize, speaker_split, synthesize


def desk_corpus(seed, n_speakers=100, utts=10, dim=64, within_var=0.05, anisotropy=100.0):
    """Length-normalised synthetic corpus with speaker identity in the leading axes."""
    return length_normalize(synthesize(n_speakers, utts, dim, 1.0, within_var, seed=seed, anisotropy=anisotropy))


@pytest.fixture(scope="session")
def train_store():
    return desk_corpus(0, n_speakers=60, utts=8, dim=16)


@pytest.fixture(scope="session")
def small_task():
    """Corpus and split for evaluation tests: 40 train, 10 target, 10 non-target speakers."""
    store = desk_corpus(1, n_speakers=120, utts=8, dim=16, within_var=0.1)
    split = speaker_split(store, 40, 10, 10, query_utts=2, seed=1)
    return store, split


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
