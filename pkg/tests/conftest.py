import networkx as nx
import numpy as np
import pytest

from claim_im.graph import Graph


def random_small_graph(rng, n_max=8, e_max=12, n_min=3):
    n = int(rng.integers(n_min, n_max + 1))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = int(rng.integers(1, min(e_max, len(pairs)) + 1))
    pick = rng.choice(len(pairs), size=m, replace=False)
    return Graph([pairs[i] for i in pick], nodes=range(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    return Graph([(0, 1), (1, 2)])


@pytest.fixture
def star5():
    return Graph([(0, i) for i in range(1, 6)])


@pytest.fixture
def ba_graphs():
    return [Graph.from_networkx(nx.barabasi_albert_graph(40, 2, seed=s)) for s in (1, 2)]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")


# one PASS/FAIL line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key])
