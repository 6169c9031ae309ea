import numpy as np
import pytest

from convreg import KernelTensor


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_kernel(rng, k, g, h, lo=-1.0, hi=1.0):
    return KernelTensor(rng.uniform(lo, hi, (k, k, g, h)))


def rel_err(approx, exact, floor=1e-300):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return np.abs(approx - exact) / np.maximum(np.abs(exact), floor)
