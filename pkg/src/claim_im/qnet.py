"""Geometric-DQN: GCN layers, one differentiable pooling stage and a dense head.

Everything is plain numpy in float64 with hand-written backpropagation.

Forward pass for a state ``(F, A)`` with ``n`` nodes::

    H1 = gcn(F, A, W1)            n x h
    H2 = gcn(H1, A, W2)           n x h
    Z  = gcn(H2, A, We)           n x h     pooled embeddings
    P  = softmax(gcn(H2, A, Wa))  n x c     soft cluster assignment
    X  = P^T Z,  Ap = P^T A P     c x h, c x c
    Y  = gcn(X, Ap, Wp)           c x h     convolution on the coarse graph
    e  = mean(Y, axis=0)          h         state embedding

and ``Q = fc2(relu(fc1([e, phi(a), g * goal_scale])))``.
"""

import io
import itertools
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import DimensionError

_uid = itertools.count()


@dataclass(frozen=True)
class Architecture:
    in_dim: int = 32
    hidden: int = 64
    clusters: int = 8
    fc_width: int = 128
    goal_scale: float = 0.01

    @property
    def head_in(self):
        return self.hidden + self.in_dim + 1

    def shapes(self):
        h = self.hidden
        return {
            "W1": (self.in_dim, h),
            "W2": (h, h),
            "We": (h, h),
            "Wa": (h, self.clusters),
            "Wp": (h, h),
            "fc1_w": (self.head_in, self.fc_width),
            "fc1_b": (self.fc_width,),
            "fc2_w": (self.fc_width,),
            "fc2_b": (1,),
        }


class QParams:
    """All learnable arrays plus an update counter."""

    def __init__(self, arch: Architecture, arrays, version=0):
        self.arch = arch
        self.arrays = arrays
        self.version = version
        for name, shape in arch.shapes().items():
            if arrays[name].shape != shape:
                raise DimensionError(f"{name} has shape {arrays[name].shape}, expected {shape}")

    def __getitem__(self, name):
        return self.arrays[name]

    def copy(self):
        return QParams(self.arch, {k: v.copy() for k, v in self.arrays.items()}, self.version)

    def is_finite(self):
        return all(np.isfinite(v).all() for v in self.arrays.values())

    def flat(self):
        return np.concatenate([self.arrays[k].ravel() for k in self.arch.shapes()])


def init_params(arch: Architecture, rng) -> QParams:
    """Glorot-uniform weights, zero biases."""
    arrays = {}
    for name, shape in arch.shapes().items():
        if len(shape) == 2:
            lim = np.sqrt(6.0 / (shape[0] + shape[1]))
            arrays[name] = rng.uniform(-lim, lim, size=shape)
        elif name == "fc2_w":
            lim = np.sqrt(6.0 / (shape[0] + 1))
            arrays[name] = rng.uniform(-lim, lim, size=shape)
        else:
            arrays[name] = np.zeros(shape)
    return QParams(arch, arrays)


def zero_params(arch: Architecture) -> QParams:
    return QParams(arch, {k: np.zeros(s) for k, s in arch.shapes().items()})


class StateRepr:
    """Node features and 0/1 adjacency of one observed subgraph.

    ``nodes`` gives the row order. ``uid`` is unique per instance and keys
    caches of derived quantities.
    """

    __slots__ = ("features", "adjacency", "nodes", "uid", "_norm")

    def __init__(self, features, adjacency, nodes=None):
        features = np.asarray(features, dtype=np.float64)
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise DimensionError("adjacency must be square")
        if features.ndim != 2 or features.shape[0] != adjacency.shape[0]:
            raise DimensionError("feature rows must match adjacency order")
        self.features = features
        self.adjacency = adjacency
        self.nodes = tuple(range(len(features))) if nodes is None else tuple(nodes)
        self.uid = next(_uid)
        self._norm = None

    @property
    def n(self):
        return self.adjacency.shape[0]

    def normalized(self):
        if self._norm is None:
            self._norm = normalize_adjacency(self.adjacency)
        return self._norm


def normalize_adjacency(a):
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the row sums of ``A + I``."""
    at = a + np.eye(a.shape[0])
    s = 1.0 / np.sqrt(at.sum(axis=1))
    return at * s[:, None] * s[None, :]


def gcn_layer(F, A, W):
    """``ReLU(D^-1/2 (A+I) D^-1/2 F W)``."""
    F, A, W = np.asarray(F, float), np.asarray(A, float), np.asarray(W, float)
    if A.shape[0] != A.shape[1] or F.shape[0] != A.shape[0] or F.shape[1] != W.shape[0]:
        raise DimensionError(f"incompatible shapes F{F.shape} A{A.shape} W{W.shape}")
    return np.maximum(normalize_adjacency(A) @ F @ W, 0.0)


def _softmax_rows(x):
    z = x - x.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def diff_pool(F, A, W_embed, W_assign):
    """Soft-cluster a graph: returns ``(P^T Z, P^T A P, P)``."""
    Z = gcn_layer(F, A, W_embed)
    P = _softmax_rows(gcn_layer(F, A, W_assign))
    return P.T @ Z, P.T @ A @ P, P


def _forward_state(params, s: StateRepr, keep=False):
    a = params.arrays
    if s.features.shape[1] != params.arch.in_dim:
        raise DimensionError(
            f"feature width {s.features.shape[1]} != network input {params.arch.in_dim}"
        )
    An = s.normalized()
    AF = An @ s.features
    pre1 = AF @ a["W1"]
    H1 = np.maximum(pre1, 0.0)
    AH1 = An @ H1
    pre2 = AH1 @ a["W2"]
    H2 = np.maximum(pre2, 0.0)
    AH2 = An @ H2
    pre_z = AH2 @ a["We"]
    Z = np.maximum(pre_z, 0.0)
    pre_s = AH2 @ a["Wa"]
    S = np.maximum(pre_s, 0.0)
    P = _softmax_rows(S)
    X = P.T @ Z
    AP = s.adjacency @ P
    Ap = P.T @ AP
    At = Ap + np.eye(Ap.shape[0])
    deg = At.sum(axis=1)
    sc = 1.0 / np.sqrt(deg)
    Apn = At * sc[:, None] * sc[None, :]
    AX = Apn @ X
    pre_y = AX @ a["Wp"]
    Y = np.maximum(pre_y, 0.0)
    e = Y.mean(axis=0)
    if not keep:
        return e, None
    cache = dict(An=An, AF=AF, pre1=pre1, AH1=AH1, pre2=pre2, AH2=AH2, pre_z=pre_z, Z=Z,
                 pre_s=pre_s, P=P, X=X, AP=AP, At=At, deg=deg, sc=sc, Apn=Apn, AX=AX,
                 pre_y=pre_y)
    return e, cache


def _backward_state(params, cache, de, grads):
    a = params.arrays
    c = cache["P"].shape[1]
    dY = np.broadcast_to(de / c, cache["pre_y"].shape)
    dpre_y = dY * (cache["pre_y"] > 0)
    grads["Wp"] += cache["AX"].T @ dpre_y
    dAX = dpre_y @ a["Wp"].T
    X = cache["X"]
    Apn = cache["Apn"]
    dX = Apn.T @ dAX
    dApn = dAX @ X.T
    # normalisation of the coarse adjacency
    At, deg, sc = cache["At"], cache["deg"], cache["sc"]
    dAt = dApn * sc[:, None] * sc[None, :]
    dsc = (dApn * At * sc[None, :]).sum(axis=1) + (dApn * At * sc[:, None]).sum(axis=0)
    ddeg = dsc * (-0.5) * deg ** -1.5
    dAt = dAt + ddeg[:, None]
    dAp = dAt
    P = cache["P"]
    dP = cache["AP"] @ (dAp + dAp.T)
    dP += cache["Z"] @ dX.T
    dZ = P @ dX
    dS = P * (dP - (dP * P).sum(axis=1, keepdims=True))
    dpre_s = dS * (cache["pre_s"] > 0)
    dpre_z = dZ * (cache["pre_z"] > 0)
    AH2 = cache["AH2"]
    grads["Wa"] += AH2.T @ dpre_s
    grads["We"] += AH2.T @ dpre_z
    dAH2 = dpre_s @ a["Wa"].T + dpre_z @ a["We"].T
    An = cache["An"]
    dH2 = An.T @ dAH2
    dpre2 = dH2 * (cache["pre2"] > 0)
    grads["W2"] += cache["AH1"].T @ dpre2
    dH1 = An.T @ (dpre2 @ a["W2"].T)
    dpre1 = dH1 * (cache["pre1"] > 0)
    grads["W1"] += cache["AF"].T @ dpre1


def _head_input(params, e, a_embs, g):
    a_embs = np.atleast_2d(np.asarray(a_embs, dtype=np.float64))
    if a_embs.shape[1] != params.arch.in_dim:
        raise DimensionError(
            f"action embedding width {a_embs.shape[1]} != {params.arch.in_dim}"
        )
    m = a_embs.shape[0]
    goal_col = np.full((m, 1), float(g) * params.arch.goal_scale)
    return np.hstack([np.broadcast_to(e, (m, e.shape[0])), a_embs, goal_col])


def _head(params, x):
    a = params.arrays
    pre = x @ a["fc1_w"] + a["fc1_b"]
    h = np.maximum(pre, 0.0)
    return h @ a["fc2_w"] + a["fc2_b"][0], pre, h


def state_embedding(params: QParams, s: StateRepr):
    """Fixed-length pooled state vector fed to the dense head."""
    return _forward_state(params, s)[0]


def q_values(params: QParams, s: StateRepr, a_embs, g, e=None):
    """Q for every row of ``a_embs``; ``e`` may pass a precomputed state embedding."""
    if e is None:
        e = state_embedding(params, s)
    if len(np.atleast_2d(a_embs)) == 0 or np.size(a_embs) == 0:
        return np.zeros(0)
    return _head(params, _head_input(params, e, a_embs, g))[0]


def q_value(params: QParams, s: StateRepr, a_emb, g):
    return float(q_values(params, s, np.asarray(a_emb)[None, :], g)[0])


def bellman_targets(target_params, batch, gamma, cache=None):
    """``r`` for terminal steps, else ``r + gamma * max_a' Q_target(s', a', g)``.

    ``cache`` maps ``StateRepr.uid`` to target-network state embeddings and
    must be cleared whenever ``target_params`` changes.
    """
    y = np.empty(len(batch))
    for i, tr in enumerate(batch):
        y[i] = tr.reward
        if tr.terminal or tr.next_state is None or len(tr.next_action_embs) == 0:
            continue
        ns = tr.next_state
        e = None if cache is None else cache.get(ns.uid)
        if e is None:
            e = state_embedding(target_params, ns)
            if cache is not None:
                cache[ns.uid] = e
        y[i] += gamma * float(np.max(q_values(target_params, ns, tr.next_action_embs, tr.goal, e)))
    return y


def loss_and_grad(params: QParams, batch, targets):
    """Mean of ``0.5 * (Q(s, a, g) - y)^2`` over the batch and its gradient."""
    grads = {k: np.zeros_like(v) for k, v in params.arrays.items()}
    a = params.arrays
    B = len(batch)
    h_dim = params.arch.hidden
    loss = 0.0
    for tr, y in zip(batch, targets):
        e, cache = _forward_state(params, tr.state, keep=True)
        x = _head_input(params, e, tr.action_emb[None, :], tr.goal)[0]
        q, pre, h = _head(params, x[None, :])
        diff = float(q[0]) - y
        loss += 0.5 * diff * diff / B
        dq = diff / B
        grads["fc2_w"] += dq * h[0]
        grads["fc2_b"][0] += dq
        dpre = dq * a["fc2_w"] * (pre[0] > 0)
        grads["fc1_w"] += np.outer(x, dpre)
        grads["fc1_b"] += dpre
        de = (a["fc1_w"] @ dpre)[:h_dim]
        _backward_state(params, cache, de, grads)
    return loss, grads


class SGD:
    def __init__(self, lr=1e-3):
        self.lr = lr

    def step(self, params, grads):
        return {k: v - self.lr * grads[k] for k, v in params.arrays.items()}


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        out = {}
        for k, w in params.arrays.items():
            g = grads[k]
            m = self.m[k] = self.beta1 * self.m.get(k, 0.0) + (1 - self.beta1) * g
            v = self.v[k] = self.beta2 * self.v.get(k, 0.0) + (1 - self.beta2) * g * g
            mh = m / (1 - self.beta1 ** self.t)
            vh = v / (1 - self.beta2 ** self.t)
            out[k] = w - self.lr * mh / (np.sqrt(vh) + self.eps)
        return out


def td_update(params, target_params, batch, gamma, lr=1e-3, optimizer=None, target_cache=None):
    """One gradient step on the mean Bellman loss; returns ``(new_params, loss)``.

    An empty batch returns ``params`` unchanged.
    """
    if not batch:
        return params, 0.0
    y = bellman_targets(target_params, batch, gamma, target_cache)
    loss, grads = loss_and_grad(params, batch, y)
    optimizer = optimizer or SGD(lr)
    return QParams(params.arch, optimizer.step(params, grads), params.version + 1), loss


def sync_target(params: QParams) -> QParams:
    return params.copy()


_MAGIC = b"CLAIMQNET\x01"


def save_params(params: QParams, path_or_buf):
    """Write a self-describing little-endian float64 checkpoint.

    The byte stream depends only on the parameter values, so identical runs
    produce identical files.
    """
    names = list(params.arch.shapes())
    header = json.dumps(
        {
            "arch": asdict(params.arch),
            "version": params.version,
            "arrays": [[k, list(params.arrays[k].shape)] for k in names],
        },
        sort_keys=True,
    ).encode("utf-8")
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<Q", len(header)))
    buf.write(header)
    for k in names:
        buf.write(np.ascontiguousarray(params.arrays[k], dtype="<f8").tobytes())
    data = buf.getvalue()
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(data)
    else:
        with open(path_or_buf, "wb") as fh:
            fh.write(data)


def load_params(path_or_buf) -> QParams:
    if hasattr(path_or_buf, "read"):
        data = path_or_buf.read()
    else:
        with open(path_or_buf, "rb") as fh:
            data = fh.read()
    if not data.startswith(_MAGIC):
        raise ValueError("not a Q-network checkpoint")
    off = len(_MAGIC)
    (hlen,) = struct.unpack("<Q", data[off:off + 8])
    off += 8
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    arch = Architecture(**header["arch"])
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
        arrays[name] = arr.reshape(shape)
        off += 8 * count
    return QParams(arch, arrays, header["version"])
