import numpy as np
import pytest

from shearlab.spectral import make_grid, transform_to_spectral
from shearlab.multipliers import build_params


@pytest.fixture(scope="session")
def params_cache():
    cache = {}

    def get(nu, mu=2.0 / 3.0, l_max=200):
        key = (nu, mu, l_max)
        if key not in cache:
            cache[key] = build_params(nu, mu, l_max)
        return cache[key]

    return get


@pytest.fixture
def grid32():
    return make_grid(32, 32, np.pi)


@pytest.fixture
def grid16():
    return make_grid(16, 16, np.pi)


def random_real_field(grid, seed, t=0.0, band=None):
    """Random real physical field, optionally band-limited to the dealias mask."""
    rng = np.random.default_rng(seed)
    phys = rng.standard_normal(grid.shape)
    f = transform_to_spectral(phys, grid, t)
    if band == "dealias":
        f.dealias()
    return f


def hermitize(grid, coeffs):
    """Project complex coefficients onto the real-field (Hermitian) subspace."""
    nx, ny = grid.shape
    idx = np.ix_((-np.arange(nx)) % nx, (-np.arange(ny)) % ny)
    return 0.5 * (coeffs + np.conj(coeffs[idx]))
