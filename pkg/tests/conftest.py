from __future__ import annotations

import numpy as np
import pytest

from swgen.sources import dsbs, sample_orbit


@pytest.fixture(scope="session")
def dsbs_orbit():
    return sample_orbit(dsbs(0.11), 200_000, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
