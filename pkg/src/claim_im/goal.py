"""Tree-approximation goal generator.

An unknown network is approximated by |S| disjoint trees hanging off the start
set: ``K1`` nodes in the first layer and ``r`` children per node afterwards.
A synthetic propagation probability ``p_prime`` is calibrated so that the
expected tree influence matches the estimated average influence; the goal of
an episode is the same tree influence with ``K1`` replaced by the observed
neighbourhood size of the start set.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConfigurationError, DegenerateStructureError

logger = logging.getLogger(__name__)

GRID_STEP = 1e-4


@dataclass(frozen=True)
class NetworkEstimates:
    v_est: float
    e_est: float
    i_est: float
    s_size: int

    def __post_init__(self):
        if not self.s_size >= 1:
            raise ConfigurationError("s_size must be >= 1")
        if not self.v_est > self.s_size:
            raise ConfigurationError("v_est must exceed s_size")
        if not self.e_est >= 1:
            raise ConfigurationError("e_est must be >= 1")
        if not self.s_size <= self.i_est <= self.v_est:
            raise ConfigurationError(
                f"i_est={self.i_est} outside the feasible range [{self.s_size}, {self.v_est}]"
            )

    @property
    def branching(self):
        return 2.0 * self.e_est / self.v_est - 1.0

    @property
    def first_layer(self):
        return self.s_size * 2.0 * self.e_est / self.v_est

    @classmethod
    def clamped(cls, v_est, e_est, i_est, s_size):
        """Build estimates, pulling ``i_est`` into ``[s_size, v_est]`` with a warning."""
        lo, hi = float(s_size), float(v_est)
        if not lo <= i_est <= hi:
            fixed = min(max(i_est, lo), hi)
            warnings.warn(f"i_est={i_est} clamped to {fixed}", RuntimeWarning, stacklevel=2)
            i_est = fixed
        return cls(float(v_est), float(e_est), float(i_est), int(s_size))


@dataclass(frozen=True)
class GoalEstimate:
    p_prime: float
    r: float
    g: float = float("nan")


def tree_layers(v_est, s_size, k1, r):
    """Real-valued depth ``L`` of a tree holding ``v_est - s_size`` nodes below the roots."""
    if r <= 0:
        raise DegenerateStructureError(f"branching factor must be positive, got {r}")
    if k1 <= 0:
        raise DegenerateStructureError(f"first layer size must be positive, got {k1}")
    x = (v_est - s_size) / k1
    if r == 1:
        return float(x)
    arg = x * (r - 1)
    if arg <= -1:
        # r < 1 and the series converges below v_est: the tree never fills up
        return float("inf")
    return float(np.log1p(arg) / np.log1p(r - 1))


def tree_influence(p_prime, s_size, k1, r, L):
    """Expected activated count ``J`` in the layered tree at probability ``p_prime``."""
    if not 0 <= p_prime <= 1:
        raise ConfigurationError(f"p_prime must lie in [0, 1], got {p_prime}")
    if p_prime == 0:
        return float(s_size)
    q = p_prime * r
    if q == 1:
        series = L
    elif np.isinf(L):
        series = np.inf if q > 1 else 1.0 / (1.0 - q)
    else:
        series = np.expm1(L * np.log(q)) / (q - 1)
    return float(s_size + k1 * p_prime * series)


def _tree_influence_grid(grid, s_size, k1, r, L):
    q = grid * r
    out = np.empty_like(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        series = np.expm1(L * np.log(q)) / (q - 1)
    series = np.where(q == 1, L, series)
    out[:] = s_size + k1 * grid * series
    out[grid == 0] = s_size
    return out


def calibrate_p(est: NetworkEstimates, step=GRID_STEP):
    """Grid search for the ``p_prime`` whose tree influence is closest to ``i_est``.

    Returns the smallest grid value attaining the minimum distance.
    """
    r = est.branching
    k1 = est.first_layer
    L = tree_layers(est.v_est, est.s_size, k1, r)
    n = int(round(1.0 / step))
    grid = np.arange(n + 1) / n
    J = _tree_influence_grid(grid, est.s_size, k1, r, L)
    dist = np.abs(J - est.i_est)
    p = float(grid[int(np.argmin(dist))])
    return GoalEstimate(p_prime=p, r=r)


def goal_for_subgraph(ge: GoalEstimate, est: NetworkEstimates, n_s):
    """Per-episode goal for a start set with ``n_s`` observed neighbours."""
    if n_s < 1:
        raise DegenerateStructureError("start set has no neighbours")
    L = tree_layers(est.v_est, est.s_size, n_s, ge.r)
    return tree_influence(ge.p_prime, est.s_size, n_s, ge.r, L)


class GoalGenerator(BaseEstimator, TransformerMixin):
    """Calibrate on global estimates, then map neighbourhood sizes to goals.

    Parameters
    ----------
    v_est, e_est : float
        Estimated node and edge counts of the hidden network.
    i_est : float
        Estimated average influence; clamped into ``[s_size, v_est]``.
    s_size : int
        Size of the start set.
    grid_step : float
        Resolution of the probability grid search.

    Attributes
    ----------
    p_prime_, r_, k1_, L_, J_ : float
        Calibrated probability, branching term, first-layer size, depth and the
        tree influence at ``p_prime_``.
    """

    def __init__(self, v_est=100.0, e_est=200.0, i_est=20.0, s_size=5, grid_step=GRID_STEP):
        self.v_est = v_est
        self.e_est = e_est
        self.i_est = i_est
        self.s_size = s_size
        self.grid_step = grid_step

    def fit(self, X=None, y=None):
        self.estimates_ = NetworkEstimates.clamped(self.v_est, self.e_est, self.i_est, self.s_size)
        ge = calibrate_p(self.estimates_, self.grid_step)
        self.p_prime_ = ge.p_prime
        self.r_ = ge.r
        self.k1_ = self.estimates_.first_layer
        self.L_ = tree_layers(self.estimates_.v_est, self.s_size, self.k1_, self.r_)
        self.J_ = tree_influence(self.p_prime_, self.s_size, self.k1_, self.r_, self.L_)
        return self

    def goal(self, n_s):
        """Goal for one start set; isolated start sets fall back to ``s_size``."""
        if n_s < 1:
            return float(self.s_size)
        return goal_for_subgraph(GoalEstimate(self.p_prime_, self.r_), self.estimates_, n_s)

    def transform(self, X):
        n_s = np.asarray(X, dtype=float).reshape(-1)
        return np.array([self.goal(v) for v in n_s])
