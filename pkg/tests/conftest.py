"""
Test configuration and utilities
"""
import pytest
import tempfile
from pathlib import Path

import numpy as np

# Add src to Python path
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from shared.models import Grid  # noqa: E402
from shared.utils import derive_params  # noqa: E402


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests"""
    with tempfile.TemporaryDirectory() as tmp_dir:
        yield tmp_dir


@pytest.fixture
def gamma_one():
    """gamma = 1: alpha = 2/3, s = -1/2"""
    return derive_params(1.0)


@pytest.fixture(params=[0.25, 1.0, 1.75])
def gamma_params(request):
    """A small spread of exponents across (0, 2)"""
    return derive_params(request.param)


@pytest.fixture
def unit_interval():
    """[0, 1] with h = 1/64"""
    return Grid.from_spacing([(0.0, 1.0)], 1.0 / 64)


@pytest.fixture
def unit_square():
    """[-1/2, 1/2]^2 with h = 1/32"""
    return Grid.from_spacing([(-0.5, 0.5), (-0.5, 0.5)], 1.0 / 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
