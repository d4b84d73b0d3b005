import numpy as np
import pytest

from locfisher.model import SourceConfiguration


def equispaced(n, x, centered=False, weights=None):
    shift = -(-n // 2) if centered else 0
    alphas = [(i - shift) * x for i in range(1, n + 1)]
    if weights is None:
        return SourceConfiguration.equal_weights(alphas)
    return SourceConfiguration(tuple(alphas), tuple(weights))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
