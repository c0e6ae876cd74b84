from src.display import DisplayGeometry, Viewer

import numpy as np
import pytest


@pytest.fixture
def prototype() -> DisplayGeometry:
    return DisplayGeometry.prototype()


@pytest.fixture
def bench() -> DisplayGeometry:
    return DisplayGeometry.bench()


@pytest.fixture
def viewer() -> Viewer:
    return Viewer.at(0.0, 1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
