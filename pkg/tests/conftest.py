import numpy as np
import pytest

from swan_isac.geometry import SwanLayout


@pytest.fixture
def layout():
    """Ten 3 m segments: the full-size layout."""
    return SwanLayout()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
