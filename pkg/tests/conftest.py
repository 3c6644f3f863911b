import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("btlab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("btlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_symmetrize(arr: np.ndarray) -> np.ndarray:
    """Average of a dense tensor over all index permutations."""
    import itertools

    k = arr.ndim
    perms = list(itertools.permutations(range(k)))
    return sum(np.transpose(arr, p) for p in perms) / len(perms)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotate_dense(arr: np.ndarray, theta: float) -> np.ndarray:
    R = rotation(theta)
    out = arr
    for axis in range(arr.ndim):
        out = np.moveaxis(np.tensordot(R, out, axes=([1], [axis])), 0, axis)
    return out
