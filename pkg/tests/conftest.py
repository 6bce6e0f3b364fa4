"""Shared fixtures: the chapter-7 style default setup used across tests."""

import numpy as np
import pytest

from dce.params import default_params


@pytest.fixture(scope="session")
def defaults():
    """4x2(+2) geometry, unit variances, P_ave=20 dB, P_bar_t=30, P_bar_l=20."""
    return default_params()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
