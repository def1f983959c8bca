import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_channel(rng, k, m, scale=1.0):
    """One fading state: K x M complex Gaussian rows."""
    re = rng.standard_normal((k, m))
    im = rng.standard_normal((k, m))
    return scale * (re + 1j * im) / np.sqrt(2.0)
