import numpy as np
import pytest

from komatu_loewner.geometry import SlitConfig


@pytest.fixture(scope="session")
def golden():
    """One slit at height 1 over [-1, 1]."""
    return SlitConfig([1.0], [-1.0], [1.0])


@pytest.fixture(scope="session")
def two_slits():
    return SlitConfig([1.0, 2.0], [-1.0, 0.5], [0.5, 2.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
