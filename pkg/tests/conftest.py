import pytest

from artifact.source import WeightSource
from artifact.weights import WeightCache


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    # keep test runs away from the user's cache
    return tmp_path_factory.mktemp("weights")


@pytest.fixture(scope="session")
def source(cache_dir):
    """Snapped weights from the bundled cache; a miss is an error, never an integration."""
    return WeightSource(WeightCache(cache_dir), compute=False)


@pytest.fixture(scope="session")
def raw_source(cache_dir):
    return WeightSource(WeightCache(cache_dir), compute=False, snap=False)
