import functools

import pytest
from hypothesis import HealthCheck, settings

from momentcone.measures import Window
from momentcone.models import Gamma, PoissonPP, sample_many

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

UNIT = Window((0.0,), (1.0,))


@functools.lru_cache(maxsize=None)
def cached_batch(model, window, seed, count, trunc_eps=1e-6):
    return sample_many(model, window, seed, count, trunc_eps)


@pytest.fixture(scope="session")
def gamma_unit_batch():
    return cached_batch(Gamma(1.0), UNIT, 11, 20000)


@pytest.fixture(scope="session")
def poisson_batch():
    return cached_batch(PoissonPP(2.0), Window((0.0,), (2.0,)), 5, 4000)
