import numpy as np
import pytest


def random_spd(rng, dim, jitter=0.5):
    """Random well-conditioned SPD matrix via a random factor plus ridge."""
    a = rng.normal(size=(dim, dim))
    return a @ a.T + jitter * dim * np.eye(dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
