"""Replay buffer with hindsight relabelling and curriculum-guided batch selection."""

from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError, RelabelError


@dataclass(frozen=True)
class Transition:
    state: object
    action_emb: np.ndarray
    reward: float
    goal: float
    next_state: object
    next_action_embs: np.ndarray
    achieved_goal: Optional[float] = None
    state_emb: Optional[np.ndarray] = None
    terminal: bool = False
    action: Optional[int] = None
    next_actions: tuple = ()
    relabeled: bool = False


def goal_reward(achieved, goal):
    """Goal-normalised terminal reward ``(I - g) / g``."""
    return (achieved - goal) / goal


@dataclass
class CherConfig:
    capacity: int = 5000
    k: int = 32
    m: int = 3
    lambda0: float = 1.0
    gamma_lambda: float = 0.99
    c: Optional[float] = None

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ConfigurationError("k and m must be positive")
        if self.capacity < self.m * self.k:
            raise ConfigurationError("capacity must be at least m * k")
        if not 0 < self.gamma_lambda <= 1:
            raise ConfigurationError("gamma_lambda must lie in (0, 1]")
        if self.lambda0 < 0:
            raise ConfigurationError("lambda0 must be non-negative")


class ReplayBuffer:
    """FIFO store; ``index`` of an entry is its global insertion number."""

    def __init__(self, capacity):
        self.capacity = int(capacity)
        self._items = deque(maxlen=self.capacity)
        self._count = 0

    def store(self, tr: Transition):
        self._items.append((self._count, tr))
        self._count += 1

    def extend(self, transitions):
        for tr in transitions:
            self.store(tr)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i][1]

    def __iter__(self):
        return (tr for _, tr in self._items)

    def index(self, i):
        return self._items[i][0]

    @property
    def total_stored(self):
        return self._count

    def sample_uniform(self, k, rng):
        n = len(self._items)
        idx = rng.choice(n, size=min(k, n), replace=False)
        return [self._items[i][1] for i in np.sort(idx)]


def relabel_her(episode, strategy="final"):
    """Copies of ``episode`` whose goal is the influence actually achieved.

    Terminal rewards become ``(I - I) / I = 0``; intermediate rewards stay 0.
    """
    if strategy != "final":
        raise NotImplementedError(f"pseudo-goal strategy {strategy!r}")
    if not episode or not episode[-1].terminal:
        raise RelabelError("episode is incomplete")
    achieved = episode[-1].achieved_goal
    if achieved is None or any(tr.achieved_goal is None for tr in episode):
        raise RelabelError("episode has no achieved goal recorded")
    out = []
    for tr in episode:
        r = goal_reward(achieved, achieved) if tr.terminal else 0.0
        out.append(replace(tr, goal=achieved, reward=r, relabeled=True))
    return out


def _gaps(transitions):
    return np.array([abs(tr.achieved_goal - tr.goal) for tr in transitions], dtype=np.float64)


def _check_c(gaps, c):
    if len(gaps) and c < gaps.max():
        raise ConfigurationError(f"c={c} is below the largest goal gap {gaps.max()}")


def f_prox(A, c):
    """``sum_i (c - |g'_i - g_i|)``."""
    gaps = _gaps(A)
    _check_c(gaps, c)
    return float(np.sum(c - gaps))


def f_div(A, B):
    """Facility-location coverage of ``B`` by ``A`` under dot-product similarity."""
    if not A:
        return 0.0
    EA = np.array([tr.state_emb for tr in A])
    EB = np.array([tr.state_emb for tr in B])
    sim = EA @ EB.T
    return float(np.maximum(sim.max(axis=0), 0.0).sum())


def greedy_select(gaps, emb, k, lam, c):
    """Greedy maximiser of prox + lam * div over candidate rows.

    Returns selected row indices (in pick order) and their marginal gains.
    Ties resolve to the lowest row.
    """
    gaps = np.asarray(gaps, dtype=np.float64)
    _check_c(gaps, c)
    n = len(gaps)
    if n <= k:
        return list(range(n)), None
    prox = c - gaps
    sim = emb @ emb.T
    cover = np.zeros(n)
    taken = np.zeros(n, dtype=bool)
    picked, gains = [], []
    for _ in range(k):
        div = np.maximum(sim - cover[None, :], 0.0).sum(axis=1)
        gain = prox + lam * div
        gain[taken] = -np.inf
        i = int(np.argmax(gain))
        taken[i] = True
        cover = np.maximum(cover, sim[i])
        picked.append(i)
        gains.append(float(gain[i]))
    return picked, gains


def select_batch(buf: ReplayBuffer, cfg: CherConfig, lam, rng, return_gains=False):
    """Sample a pool of ``m * k`` transitions uniformly and pick ``k`` greedily."""
    n = len(buf)
    size = min(cfg.m * cfg.k, n)
    pool = np.sort(rng.choice(n, size=size, replace=False))
    B = [buf[i] for i in pool]
    c = cfg.c if cfg.c is not None else 2.0 * max(_gaps(B).max(), 1.0)
    emb = np.array([tr.state_emb for tr in B], dtype=np.float64)
    picked, gains = greedy_select(_gaps(B), emb, cfg.k, lam, c)
    A = [B[i] for i in picked]
    return (A, gains) if return_gains else A


def decay_lambda(lam, gamma_lambda):
    return lam * gamma_lambda
