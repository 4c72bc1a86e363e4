import numpy as np
import pytest

from agevir.scenario import load_scenario


@pytest.fixture(scope="session")
def t1_low():
    return load_scenario("table1_beta1e-8")


@pytest.fixture(scope="session")
def t1_mid():
    return load_scenario("table1_beta5e-8")


@pytest.fixture(scope="session")
def t1_high():
    return load_scenario("table1_beta5e-7")


@pytest.fixture(scope="session")
def two_class():
    return load_scenario("table2_twoclass")


@pytest.fixture
def rng():
    return np.random.default_rng(42)
