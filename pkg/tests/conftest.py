import pytest

from graphforget import generate_sbm
from graphforget.graphs import make_graph


@pytest.fixture
def path_graph():
    """a-b-c-d path on 4 nodes."""
    return make_graph(4, [(0, 1), (1, 2), (2, 3)], feature_dim=4)


@pytest.fixture
def two_components():
    """Two disjoint single-edge components."""
    return make_graph(4, [(0, 1), (2, 3)], feature_dim=4)


@pytest.fixture
def triangle_plus_isolated():
    """K3 on nodes 0-2 plus isolated node 3."""
    return make_graph(4, [(0, 1), (0, 2), (1, 2)], feature_dim=4)


@pytest.fixture
def sbm_small():
    """Small seeded block graph used by mid-weight tests."""
    return generate_sbm(4, 12, 0.4, 0.0, 8, seed=5)
