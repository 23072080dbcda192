import os

import numpy as np
import pytest

from asyncsvrg.data import generate_synthetic
from asyncsvrg.reference import get_reference

LAM = 0.01


@pytest.fixture(scope="session", autouse=True)
def cache_env(tmp_path_factory):
    os.environ["ASYNCSVRG_CACHE_DIR"] = str(tmp_path_factory.mktemp("refcache"))


@pytest.fixture(scope="session")
def small_data():
    """Small dense synthetic problem for fast exactness tests."""
    return generate_synthetic(200, 10, seed=3)


@pytest.fixture(scope="session")
def bench_data():
    """The desk-scale benchmark problem used by the acceptance criteria."""
    return generate_synthetic(1000, 20, seed=0)


@pytest.fixture(scope="session")
def small_ref(small_data, cache_env):
    return get_reference(small_data, LAM)


@pytest.fixture(scope="session")
def bench_ref(bench_data, cache_env):
    return get_reference(bench_data, LAM)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
