import numpy as np
import pytest

from riskbandit import load_config
from riskbandit.configs import example_path


@pytest.fixture(scope="session")
def smoke_config():
    return load_config(example_path("smoke"))


@pytest.fixture(scope="session")
def surrogate_config():
    return load_config(example_path("surrogate"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
