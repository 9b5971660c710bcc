import numpy as np
import pytest

from polaronquench.fockspace import enumerate_basis
from polaronquench.model import ModelParams


@pytest.fixture
def small_params():
    return ModelParams.from_couplings(4, 2, t0=1.0, g=0.5, delta_omega=1.0)


@pytest.fixture
def mid_params():
    return ModelParams.from_couplings(5, 3, t0=1.0, g=0.7, delta_omega=1.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def basis_5_3():
    return enumerate_basis(5, 3)
