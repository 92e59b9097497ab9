import numpy as np
import pytest

from songtips import kernels, toy

BACKENDS = sorted(kernels.BACKENDS)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_corpus():
    return toy.make_toy_corpus(seed=0)


def random_psd(rng, n, rank=None):
    rank = n + 3 if rank is None else rank
    A = rng.normal(size=(n, rank))
    return A @ A.T
