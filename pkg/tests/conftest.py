"""Session-wide fixtures: the benchmark grids and their spectral data.

Building SpectralData means dense eigensolves, so the standard
configurations are shared across all test modules.
"""

import pytest

from zkline.grid import Grid2D
from zkline.spectral import unstable_modes


@pytest.fixture(scope="session")
def grid128():
    return Grid2D(24.0, 128, 1.0, 8)


@pytest.fixture(scope="session")
def spec128(grid128):
    return unstable_modes(1.0, grid128)


@pytest.fixture(scope="session")
def grid256():
    return Grid2D(24.0, 256, 1.0, 16)


@pytest.fixture(scope="session")
def spec256(grid256):
    return unstable_modes(1.0, grid256)


@pytest.fixture(scope="session")
def spec_l3():
    # three unstable wavenumbers: floor(sqrt(5) * 3 / 2) = 3
    return unstable_modes(1.0, Grid2D(24.0, 256, 3.0, 32))
