import networkx as nx
import numpy as np
import pytest

from claim_im.deepwalk import DeepWalk, WalkConfig, deepwalk, random_walks, train_embeddings
from claim_im.exceptions import ConfigurationError
from claim_im.graph import Graph

SMALL = WalkConfig(dim=8, walks_per_node=4, walk_length=10, window=3, epochs=2)


def test_isolated_node_walks_have_length_one():
    walks = random_walks(Graph(nodes=[3]), SMALL, np.random.default_rng(0))
    assert len(walks) == SMALL.walks_per_node
    assert all(w == [3] for w in walks)


def test_two_node_path_alternates():
    walks = random_walks(Graph([(0, 1)]), SMALL, np.random.default_rng(0))
    for w in walks:
        assert len(w) == SMALL.walk_length
        assert all(a != b for a, b in zip(w, w[1:]))


def test_each_node_starts_exact_number_of_walks():
    g = Graph.from_networkx(nx.cycle_graph(10))
    cfg = WalkConfig(walks_per_node=1000, walk_length=5, window=2)
    walks = random_walks(g, cfg, np.random.default_rng(0))
    starts = np.bincount([w[0] for w in walks], minlength=10)
    assert (starts == 1000).all()


def test_walks_follow_edges():
    g = Graph.from_networkx(nx.barabasi_albert_graph(30, 2, seed=1))
    for w in random_walks(g, SMALL, np.random.default_rng(1)):
        assert all(b in g.neighbors(a) for a, b in zip(w, w[1:]))


def test_shape_finite_and_deterministic():
    g = Graph.from_networkx(nx.karate_club_graph())
    a = deepwalk(g, SMALL, np.random.default_rng(5))
    b = deepwalk(g, SMALL, np.random.default_rng(5))
    assert a.vectors.shape == (len(g), SMALL.dim)
    assert np.isfinite(a.vectors).all()
    assert np.array_equal(a.vectors, b.vectors)
    assert np.abs(a.vectors).max() < 10


def _cos(x, y):
    return x @ y / (np.linalg.norm(x) * np.linalg.norm(y))


def test_two_cliques_separate():
    nxg = nx.disjoint_union(nx.complete_graph(5), nx.complete_graph(5))
    table = deepwalk(Graph.from_networkx(nxg), WalkConfig(), np.random.default_rng(0))
    intra, inter = [], []
    for i in range(10):
        for j in range(i + 1, 10):
            (intra if (i < 5) == (j < 5) else inter).append(_cos(table[i], table[j]))
    assert np.mean(intra) > np.mean(inter)


def test_warm_start_copies_vectors_before_training():
    g = Graph.from_networkx(nx.path_graph(6))
    first = deepwalk(g, SMALL, np.random.default_rng(0))
    cfg = WalkConfig(dim=8, walks_per_node=1, walk_length=2, window=1, epochs=1, learning_rate=1e-12)
    bigger = Graph(list(g.edges()) + [(5, 6)])
    second = deepwalk(bigger, cfg, np.random.default_rng(1), init=first)
    np.testing.assert_allclose(second.matrix(range(6)), first.matrix(range(6)), atol=1e-9)


def test_train_from_label_walks():
    table = train_embeddings([[10, 20, 30], [30, 20, 10]], SMALL, rng=np.random.default_rng(0))
    assert table.nodes == (10, 20, 30)
    with pytest.raises(ConfigurationError):
        train_embeddings([], SMALL)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        WalkConfig(window=40, walk_length=40)
    with pytest.raises(ValueError):
        WalkConfig(dim=0)


def test_estimator_transform_and_warm_start():
    g = Graph.from_networkx(nx.karate_club_graph())
    est = DeepWalk(dim=8, walks_per_node=2, walk_length=10, window=3, warm_start=True)
    out = est.fit(g).transform([0, 1, 2])
    assert out.shape == (3, 8)
    est.fit(g)
    assert est.get_params()["dim"] == 8
