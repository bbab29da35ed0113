import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nitrosearch.bench.verify import absent_keys, random_unique_column
from nitrosearch.core import SortedColumn

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def column_factory(rng):
    def make(n):
        return random_unique_column(n, rng)
    return make


@pytest.fixture
def probes(rng):
    """Every present key plus ``count`` absent ones, as Python ints."""
    def make(col, count=200):
        return col.keys.tolist() + absent_keys(col, count, rng).tolist()
    return make


def dense_column(n, step=2, start=1):
    """Keys start, start+step, ... with value = position."""
    keys = np.arange(n, dtype=np.int64) * step + start
    return SortedColumn(keys.astype(np.uint32), np.arange(n, dtype=np.uint32))
