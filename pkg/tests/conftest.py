import numpy as np
import pytest

from greedy.dictionary import make_canonical, make_random_unit
from greedy.space import SpaceLp

P_VALUES = (1.5, 2.0, 3.0, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=P_VALUES, ids=lambda p: f"p={p:g}")
def space(request):
    return SpaceLp(dim=8, p=request.param)


@pytest.fixture
def hilbert():
    return SpaceLp(dim=8, p=2.0)


@pytest.fixture
def l3():
    return SpaceLp(dim=8, p=3.0)


@pytest.fixture
def random_dict(space):
    return make_random_unit(space, 12, seed=7)


@pytest.fixture
def canonical8(hilbert):
    return make_canonical(hilbert)


def random_signal(rng, space, scale=1.0):
    """Non-zero vector of ℓ_p norm *scale*."""
    x = rng.standard_normal(space.dim)
    norm = float(np.sum(np.abs(x) ** space.p) ** (1.0 / space.p))
    return scale * x / norm
