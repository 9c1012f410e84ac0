import os

import numpy as np
import pytest

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
BOSTON_CSV = os.path.join(DATA_DIR, "boston.csv")


@pytest.fixture(scope="session")
def boston_path():
    return BOSTON_CSV


@pytest.fixture(scope="session")
def boston():
    from softrules.data import load_csv

    return load_csv(BOSTON_CSV, "medv")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
