import numpy as np
import pytest

from dunkl_lab import build_rank_one, build_type_a, build_type_b, multiplicity


@pytest.fixture(scope="session")
def a2():
    return build_type_a(3)


@pytest.fixture(scope="session")
def a3():
    return build_type_a(4)


@pytest.fixture(scope="session")
def b2():
    return build_type_b(2)


@pytest.fixture(scope="session")
def b3():
    return build_type_b(3)


@pytest.fixture(scope="session")
def rank1():
    return build_rank_one()


@pytest.fixture()
def k_one(b2):
    return multiplicity(b2, 1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240917)
