import numpy as np
import pytest

from crmg.mgcycle import MgConfig, MgPreconditioner, build_hierarchy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_cache = {}


def hierarchy(dim, level, eps):
    key = (dim, level, eps)
    if key not in _cache:
        _cache[key] = build_hierarchy(dim, level, eps)
    return _cache[key]


def preconditioner(dim, level, eps, sweeps=None):
    sweeps = (1 if dim == 2 else 5) if sweeps is None else sweeps
    return MgPreconditioner(hierarchy(dim, level, eps), MgConfig(sweeps=sweeps))


def random_spd(rng, n):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)
