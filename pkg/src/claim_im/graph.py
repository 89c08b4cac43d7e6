"""Undirected graph store, edge-list parsing and observed-subgraph expansion."""

import io
import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .exceptions import EdgeListParseError, InvalidActionError, InvalidSeedError

logger = logging.getLogger(__name__)


def _edge(u, v):
    return (u, v) if u < v else (v, u)


class Graph:
    """Immutable simple undirected graph over arbitrary non-negative integer labels.

    Parameters
    ----------
    edges : iterable of (u, v) pairs
        Duplicates and reversed duplicates collapse to one edge. Self-loops are
        dropped and counted in ``dropped_self_loops``.
    nodes : iterable of int, optional
        Extra (possibly isolated) nodes.
    """

    __slots__ = ("_adj", "_nodes", "_index", "_edges", "dropped_self_loops", "_edge_index")

    def __init__(self, edges=(), nodes=()):
        adj = {}
        loops = 0
        for u in nodes:
            adj.setdefault(int(u), set())
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                loops += 1
                adj.setdefault(u, set())
                continue
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        self._nodes = tuple(sorted(adj))
        self._adj = {u: tuple(sorted(nb)) for u, nb in adj.items()}
        self._index = {u: i for i, u in enumerate(self._nodes)}
        self._edges = None
        self._edge_index = None
        self.dropped_self_loops = loops

    @property
    def node_ids(self):
        return self._nodes

    @property
    def adjacency(self):
        return self._adj

    @property
    def edge_count(self):
        return sum(len(nb) for nb in self._adj.values()) // 2

    def __len__(self):
        return len(self._nodes)

    def __contains__(self, u):
        return u in self._adj

    def __iter__(self):
        return iter(self._nodes)

    def __repr__(self):
        return f"Graph(n_nodes={len(self)}, n_edges={self.edge_count})"

    def __eq__(self, other):
        return isinstance(other, Graph) and self._adj == other._adj

    def __hash__(self):
        return hash(self._nodes) ^ hash(self.edges())

    def neighbors(self, u):
        return self._adj[u]

    def degree(self, u):
        return len(self._adj[u])

    def index(self, u):
        """Position of ``u`` in ``node_ids``."""
        return self._index[u]

    def edges(self):
        """Sorted tuple of ``(u, v)`` pairs with ``u < v``."""
        if self._edges is None:
            self._edges = tuple(
                (u, v) for u in self._nodes for v in self._adj[u] if u < v
            )
        return self._edges

    def edge_index(self):
        """``(E, 2)`` int array of edge endpoints as positions into ``node_ids``."""
        if self._edge_index is None:
            idx = self._index
            arr = np.array([(idx[u], idx[v]) for u, v in self.edges()], dtype=np.int64)
            self._edge_index = arr.reshape(-1, 2)
        return self._edge_index

    def adjacency_matrix(self, order=None):
        """Dense 0/1 adjacency matrix with rows ordered by ``order`` (default ``node_ids``)."""
        order = self._nodes if order is None else tuple(order)
        pos = {u: i for i, u in enumerate(order)}
        a = np.zeros((len(order), len(order)))
        for u in order:
            i = pos[u]
            for v in self._adj[u]:
                j = pos.get(v)
                if j is not None:
                    a[i, j] = 1.0
        return a

    def subgraph(self, nodes):
        nodes = set(nodes)
        return Graph(
            ((u, v) for u, v in self.edges() if u in nodes and v in nodes), nodes=nodes
        )

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(self._nodes)
        g.add_edges_from(self.edges())
        return g

    @classmethod
    def from_networkx(cls, g):
        return cls(g.edges(), nodes=g.nodes())


def load_edge_list(text):
    """Parse an edge list into a :class:`Graph`.

    ``text`` is a string or a text stream. One edge per line as two integer
    tokens; blank lines and lines starting with ``#`` are skipped.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    edges = []
    for lineno, raw in enumerate(text, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListParseError(lineno, line, f"expected 2 tokens, got {len(tokens)}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListParseError(lineno, line, "non-integer node label") from None
        if u < 0 or v < 0:
            raise EdgeListParseError(lineno, line, "negative node label")
        edges.append((u, v))
    g = Graph(edges)
    if g.dropped_self_loops:
        logger.warning("dropped %d self-loop(s) while parsing edge list", g.dropped_self_loops)
    return g


def read_edge_list(path):
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


def write_edge_list(graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")


@dataclass(frozen=True)
class ObservedSubgraph:
    """The part of a hidden graph revealed so far.

    ``queried`` keeps query order; ``initial_set`` is the surveyed start set.
    """

    nodes: frozenset
    edges: frozenset
    queried: tuple = ()
    initial_set: frozenset = field(default_factory=frozenset)

    def as_graph(self):
        return Graph(self.edges, nodes=self.nodes)

    @property
    def frontier(self):
        """Revealed nodes that are neither queried nor in the start set."""
        return self.nodes - self.initial_set - set(self.queried)


def initial_observation(g: Graph, s: Iterable[int]) -> ObservedSubgraph:
    """Reveal ``s`` together with all of its neighbours and incident edges."""
    s = frozenset(int(u) for u in s)
    if not s:
        raise InvalidSeedError("initial set must be nonempty")
    missing = [u for u in s if u not in g]
    if missing:
        raise InvalidSeedError(f"initial nodes not in graph: {sorted(missing)[:10]}")
    nodes = set(s)
    edges = set()
    for u in s:
        for v in g.neighbors(u):
            nodes.add(v)
            edges.add(_edge(u, v))
    return ObservedSubgraph(frozenset(nodes), frozenset(edges), (), s)


def expand(sub: ObservedSubgraph, g: Graph, u: int) -> ObservedSubgraph:
    """Query ``u``: add its neighbours and only the edges incident to ``u``."""
    if u not in sub.nodes:
        raise InvalidActionError(f"node {u} is not in the observed subgraph")
    if u in sub.queried:
        raise InvalidActionError(f"node {u} was already queried")
    nb = g.neighbors(u)
    nodes = sub.nodes.union(nb)
    edges = sub.edges.union(_edge(u, v) for v in nb)
    return ObservedSubgraph(nodes, edges, sub.queried + (u,), sub.initial_set)
