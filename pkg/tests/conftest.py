import pytest

from metrics import ZOO, get_metric


def _zoo(name):
    return get_metric(ZOO[name], name=name)


@pytest.fixture(scope="session")
def euclidean():
    return _zoo("euclidean")


@pytest.fixture(scope="session")
def poincare():
    return _zoo("poincare")


@pytest.fixture(scope="session")
def sphere():
    return _zoo("sphere")


@pytest.fixture(scope="session")
def randers_flat():
    return _zoo("randers_flat")


@pytest.fixture(scope="session")
def randers_expr():
    return _zoo("randers_expr")


@pytest.fixture(scope="session")
def euclidean_disk():
    return _zoo("euclidean_disk")


@pytest.fixture(scope="session")
def quartic():
    return _zoo("quartic")
