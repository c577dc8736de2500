import numpy as np
import pytest

from cfpower.feasible_set import project
from cfpower.model import build_coefficients
from cfpower.scenario import RadioParams, generate_drop


def make_drop(seed=0, M=12, K=4, N=1, T_p=20, D_km=1.0):
    return generate_drop(M, K, N, D_km, RadioParams(T_p=T_p), seed=seed)


def random_feasible(rng, M, K, N, zero_frac=0.0):
    """A feasible point with rows at assorted radii, some entries optionally zeroed."""
    x = rng.uniform(0.0, 1.0, (M, K)) * rng.uniform(0.05, 1.5, (M, 1))
    if zero_frac:
        x[rng.random((M, K)) < zero_frac] = 0.0
    return project(x, N)


def central_fd(f, x, h_rel=1e-6):
    """Central differences with step ``h_rel * (1 + |x|)`` per coordinate."""
    g = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        h = h_rel * (1.0 + abs(x[idx]))
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return g


@pytest.fixture
def drop():
    return make_drop(seed=7, M=15, K=5, N=2, T_p=3)


@pytest.fixture
def coeffs(drop):
    return build_coefficients(drop)
