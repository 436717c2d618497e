import numpy as np
import pytest


def rescaled_cosine(rng, n, d=6):
    """Random rescaled cosine kernel, the substrate every test builds on."""
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    s = 0.5 * (1.0 + x @ x.T)
    np.fill_diagonal(s, 1.0)
    return s


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
