import numpy as np
import pytest

from atlas.constellation import bpsk, grid, parse_builtin, qam


@pytest.fixture(scope="session")
def bpsk_c():
    return bpsk()


@pytest.fixture(scope="session")
def qpsk_c():
    return parse_builtin("qpsk")


@pytest.fixture(scope="session")
def qam16_c():
    return qam(16)


@pytest.fixture(scope="session")
def grid3_c():
    return grid(3, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
