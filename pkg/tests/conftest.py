import pytest

from bitime.grid import build_disc_grid


@pytest.fixture(scope="session")
def grid32():
    """Plain disc grid at h = 1/32 with the default 2h margin."""
    return build_disc_grid(1.0 / 32.0)


@pytest.fixture(scope="session")
def grid64():
    return build_disc_grid(1.0 / 64.0)
