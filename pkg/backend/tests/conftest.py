import numpy as np
import pytest

from app.config import Settings, get_settings
from app.services import dynamics, harness
from app.services.network import build_network, cycle, mean_field, special_vertex
from app.services.spectral import decompose


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Fresh settings per test, with reports under the test's tmp_path"""
    monkeypatch.setenv('RSP_OUTPUT_DIR', str(tmp_path / 'outputs'))
    monkeypatch.setenv('RSP_THREADS', '2')
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def small_batches(monkeypatch):
    """Force many uniform-draw blocks per simulation"""
    settings = Settings(threads=2, batch_floats=1024)
    monkeypatch.setattr(dynamics, 'get_settings', lambda: settings)
    monkeypatch.setattr(harness, 'get_settings', lambda: settings)
    return settings


@pytest.fixture
def mf4():
    return mean_field(4, 0.5)


@pytest.fixture
def mf4_spec(mf4):
    return decompose(mf4)


@pytest.fixture
def cycle4():
    return cycle(4)


@pytest.fixture
def sv3():
    return special_vertex(3, 0.5)


def random_network(rng: np.random.Generator, n: int):
    """Positive column-normalized matrix (irreducible, generically diagonalizable)"""
    w = rng.random((n, n)) + 0.05
    return build_network(w / w.sum(axis=0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_networks():
    """50 random positive networks with N between 2 and 8"""
    g = np.random.default_rng(7)
    return [random_network(g, int(n)) for n in g.integers(2, 9, size=50)]
