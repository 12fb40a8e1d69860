import numpy as np
import pytest

from riemreg import model


@pytest.fixture(scope="session")
def E():
    return model("euclidean", 2)


@pytest.fixture(scope="session")
def S():
    return model("sphere", 2)


@pytest.fixture(scope="session")
def H():
    return model("hyperbolic", 2)


@pytest.fixture(scope="session")
def spaces(E, S, H):
    return {"euclidean": E, "sphere": S, "hyperbolic": H}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
