"""DeepWalk node embeddings: uniform random walks + skip-gram with negative sampling."""

from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_positive_int, check_random_state
from .exceptions import ConfigurationError


@dataclass(frozen=True)
class WalkConfig:
    dim: int = 32
    walks_per_node: int = 10
    walk_length: int = 40
    window: int = 5
    negatives: int = 5
    epochs: int = 2
    learning_rate: float = 0.025
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("dim", "walks_per_node", "walk_length", "window", "negatives", "epochs"):
            check_positive_int(getattr(self, name), name)
        if self.window >= self.walk_length:
            raise ConfigurationError("window must be smaller than walk_length")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")


@dataclass
class EmbeddingTable:
    """Node vectors plus the skip-gram context vectors used for warm starts."""

    nodes: tuple
    vectors: np.ndarray
    context: np.ndarray

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __getitem__(self, u):
        return self.vectors[self._pos[u]]

    def __post_init__(self):
        self._pos = {u: i for i, u in enumerate(self.nodes)}

    def index(self, u):
        return self._pos[u]

    def matrix(self, order):
        return self.vectors[[self._pos[u] for u in order]]


def _csr(g):
    deg = np.array([g.degree(u) for u in g.node_ids], dtype=np.int64)
    indptr = np.zeros(len(deg) + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.array(
        [g.index(v) for u in g.node_ids for v in g.neighbors(u)], dtype=np.int64
    )
    return indptr, indices, deg


def _walk_matrix(g, cfg, rng):
    """``(n * walks_per_node, walk_length)`` array of node positions, -1 padded."""
    n = len(g)
    indptr, indices, deg = _csr(g)
    starts = np.tile(np.arange(n), cfg.walks_per_node)
    walks = np.full((len(starts), cfg.walk_length), -1, dtype=np.int64)
    walks[:, 0] = starts
    pos = starts.copy()
    alive = deg[pos] > 0
    if not alive.any():
        return walks[:, :1]
    for t in range(1, cfg.walk_length):
        u = rng.random(len(pos))
        d = deg[pos]
        step = np.minimum((u * d).astype(np.int64), np.maximum(d - 1, 0))
        nxt = np.where(alive, indices[np.minimum(indptr[pos] + step, len(indices) - 1)], -1)
        walks[:, t] = nxt
        pos = np.where(alive, nxt, pos)
    return walks


def random_walks(g, cfg: WalkConfig, rng=None):
    """``walks_per_node`` uniform walks from every node, as lists of node labels.

    Walks from isolated nodes have length one.
    """
    if len(g) == 0:
        raise ConfigurationError("cannot walk on an empty graph")
    rng = check_random_state(cfg.rng_seed if rng is None else rng)
    labels = np.asarray(g.node_ids)
    return [labels[w[w >= 0]].tolist() for w in _walk_matrix(g, cfg, rng)]


def _pairs(walks, window):
    centers, contexts = [], []
    length = walks.shape[1]
    for off in range(1, window + 1):
        if off >= length:
            break
        a, b = walks[:, :-off], walks[:, off:]
        ok = (a >= 0) & (b >= 0)
        centers.append(a[ok])
        contexts.append(b[ok])
        centers.append(b[ok])
        contexts.append(a[ok])
    if not centers:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


@numba.njit(cache=True, fastmath=True)
def _sgns_epoch(W, C, centers, contexts, negs, lr_start, lr_end):
    n_pairs = centers.shape[0]
    dim = W.shape[1]
    grad = np.empty(dim)
    for i in range(n_pairs):
        lr = lr_start + (lr_end - lr_start) * i / max(n_pairs, 1)
        c = centers[i]
        grad[:] = 0.0
        for j in range(negs.shape[1] + 1):
            if j == 0:
                o = contexts[i]
                label = 1.0
            else:
                o = negs[i, j - 1]
                if o == contexts[i]:
                    continue
                label = 0.0
            s = 0.0
            for d in range(dim):
                s += W[c, d] * C[o, d]
            if s > 30.0:
                sig = 1.0
            elif s < -30.0:
                sig = 0.0
            else:
                sig = 1.0 / (1.0 + np.exp(-s))
            gsc = (label - sig) * lr
            for d in range(dim):
                grad[d] += gsc * C[o, d]
                C[o, d] += gsc * W[c, d]
        for d in range(dim):
            W[c, d] += grad[d]


def _unigram_table(weights, size=100_000):
    """Lookup table for O(1) draws proportional to ``weights``."""
    cum = np.cumsum(weights / weights.sum())
    cells = (np.arange(size) + 0.5) / size
    return np.minimum(np.searchsorted(cum, cells, side="right"), len(weights) - 1)


def train_embeddings(walks, cfg: WalkConfig, nodes=None, init=None, rng=None):
    """Skip-gram with negative sampling over (center, context) pairs in ``window``.

    ``walks`` is a list of label sequences or a position matrix. ``init`` is an
    :class:`EmbeddingTable` whose rows seed nodes present in both tables.
    Learning rate decays linearly to ``1e-4`` of its start over all epochs.
    """
    rng = check_random_state(cfg.rng_seed if rng is None else rng)
    if isinstance(walks, np.ndarray):
        mat = walks
        if nodes is None:
            raise ConfigurationError("nodes are required with a position matrix")
        nodes = tuple(nodes)
    else:
        if not walks:
            raise ConfigurationError("no walks to train on")
        if nodes is None:
            nodes = tuple(sorted({u for w in walks for u in w}))
        pos = {u: i for i, u in enumerate(nodes)}
        width = max(len(w) for w in walks)
        mat = np.full((len(walks), width), -1, dtype=np.int64)
        for i, w in enumerate(walks):
            mat[i, : len(w)] = [pos[u] for u in w]
    n, dim = len(nodes), cfg.dim

    W = (rng.random((n, dim)) - 0.5) / dim
    C = np.zeros((n, dim))
    if init is not None:
        for i, u in enumerate(nodes):
            j = init._pos.get(u)
            if j is not None:
                W[i] = init.vectors[j]
                C[i] = init.context[j]

    centers, contexts = _pairs(mat, cfg.window)
    if len(centers):
        freq = np.bincount(mat[mat >= 0], minlength=n).astype(np.float64) ** 0.75
        table = _unigram_table(freq)
        lr0, lr_min = cfg.learning_rate, cfg.learning_rate * 1e-4
        span = (lr0 - lr_min) / cfg.epochs
        for ep in range(cfg.epochs):
            order = rng.permutation(len(centers))
            u = rng.random((len(centers), cfg.negatives))
            negs = table[(u * len(table)).astype(np.int64)]
            _sgns_epoch(
                W, C, centers[order], contexts[order], negs,
                lr0 - ep * span, lr0 - (ep + 1) * span,
            )
    return EmbeddingTable(nodes, W, C)


def deepwalk(g, cfg: WalkConfig, rng=None, init=None):
    """Walk ``g`` and train embeddings for all of its nodes."""
    rng = check_random_state(cfg.rng_seed if rng is None else rng)
    mat = _walk_matrix(g, cfg, rng)
    return train_embeddings(mat, cfg, nodes=g.node_ids, init=init, rng=rng)


class DeepWalk(BaseEstimator, TransformerMixin):
    """Estimator interface: ``fit(graph)`` then ``transform(nodes)``.

    ``warm_start=True`` reuses the previous fit's vectors for nodes that are
    still present, the way successive discovery steps refresh features.
    """

    def __init__(self, dim=32, walks_per_node=10, walk_length=40, window=5, negatives=5,
                 epochs=2, learning_rate=0.025, warm_start=False, random_state=0):
        self.dim = dim
        self.walks_per_node = walks_per_node
        self.walk_length = walk_length
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.warm_start = warm_start
        self.random_state = random_state

    def _config(self):
        return WalkConfig(
            dim=self.dim, walks_per_node=self.walks_per_node, walk_length=self.walk_length,
            window=self.window, negatives=self.negatives, epochs=self.epochs,
            learning_rate=self.learning_rate, rng_seed=int(self.random_state or 0),
        )

    def fit(self, graph, y=None):
        init = getattr(self, "embedding_", None) if self.warm_start else None
        if not hasattr(self, "_rng") or not self.warm_start:
            self._rng = check_random_state(self.random_state)
        self.embedding_ = deepwalk(graph, self._config(), rng=self._rng, init=init)
        return self

    def transform(self, X):
        return self.embedding_.matrix(np.asarray(X).reshape(-1).tolist())
