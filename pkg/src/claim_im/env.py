"""Budgeted network-discovery episodes with a terminal influence reward."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._validation import check_positive_int, check_probability
from .diffusion import DiffusionConfig, estimate_influence
from .exceptions import ConfigurationError, EpisodeOverError, InvalidActionError, NotTerminalError
from .graph import ObservedSubgraph, expand, initial_observation
from .influence import greedy_select, opt_value

REWARD_MODES = ("opt_normalized", "goal_normalized")


@dataclass(frozen=True)
class EpisodeConfig:
    T: int = 5
    s_size: int = 5
    k_seeds: int = 10
    p: float = 0.1
    reward_mode: str = "goal_normalized"
    n_sims: int = 100

    def __post_init__(self):
        check_positive_int(self.T, "T")
        check_positive_int(self.s_size, "s_size")
        check_positive_int(self.k_seeds, "k_seeds")
        check_positive_int(self.n_sims, "n_sims")
        check_probability(self.p)
        if self.reward_mode not in REWARD_MODES:
            raise ConfigurationError(f"reward_mode must be one of {REWARD_MODES}")

    def diffusion(self, seed=0):
        return DiffusionConfig(p=self.p, n_sims=self.n_sims, rng_seed=int(seed))


@dataclass(frozen=True)
class EnvState:
    sub: ObservedSubgraph
    t: int
    T: int
    graph_index: int = 0
    goal: float = float("nan")

    @property
    def n_start_neighbors(self):
        return len(self.sub.nodes) - len(self.sub.initial_set)

    @property
    def done(self):
        return self.t >= self.T


def _goal_for(goal_source, graph_index, n_s):
    if goal_source is None:
        return float("nan")
    if isinstance(goal_source, (list, tuple)):
        goal_source = goal_source[graph_index]
    if callable(goal_source) and not hasattr(goal_source, "goal"):
        return float(goal_source(n_s))
    return float(goal_source.goal(n_s))


def reset(graphs, cfg: EpisodeConfig, goal_source, rng, graph_index=None) -> EnvState:
    """Sample a graph and a start set, reveal the start set, attach the goal.

    ``goal_source`` is a fitted :class:`~claim_im.goal.GoalGenerator`, a list of
    them aligned with ``graphs``, a callable ``n_s -> g`` or None.
    """
    for g in graphs:
        if len(g) < cfg.s_size:
            raise ConfigurationError(f"graph with {len(g)} nodes is smaller than s_size={cfg.s_size}")
    if graph_index is None:
        graph_index = int(rng.integers(len(graphs)))
    g = graphs[graph_index]
    s = rng.choice(np.asarray(g.node_ids), size=cfg.s_size, replace=False)
    sub = initial_observation(g, s.tolist())
    st = EnvState(sub, 0, cfg.T, graph_index)
    return replace(st, goal=_goal_for(goal_source, graph_index, st.n_start_neighbors))


def actions(st: EnvState):
    """Revealed nodes outside the start set that were not queried yet, sorted.

    At ``t = 0`` this is exactly the neighbourhood of the start set.
    """
    if st.done:
        raise EpisodeOverError("query budget exhausted")
    return tuple(sorted(st.sub.frontier))


def step(st: EnvState, u, g_hidden) -> EnvState:
    """Query ``u``; ``u=None`` is a no-op allowed only when no action is left."""
    legal = actions(st)
    if u is None:
        if legal:
            raise InvalidActionError("no-op is only allowed once the action set is empty")
        return replace(st, t=st.t + 1)
    if u not in st.sub.frontier:
        raise InvalidActionError(f"node {u} is not a legal query")
    return replace(st, sub=expand(st.sub, g_hidden, u), t=st.t + 1)


def terminal_influence(st: EnvState, g_hidden, cfg: EpisodeConfig, seed=0):
    """Influence on the full graph of greedy seeds picked on the discovered graph."""
    if not st.done:
        raise NotTerminalError("episode has not reached its budget")
    dcfg = cfg.diffusion(seed)
    seeds = greedy_select(st.sub.as_graph(), cfg.k_seeds, dcfg).seeds
    return estimate_influence(g_hidden, seeds, dcfg)


def terminal_reward(st: EnvState, g_hidden, cfg: EpisodeConfig, opt_cache=None,
                    influence: Optional[float] = None, seed=0):
    """Final-step reward: ``I / OPT`` or ``(I - g) / g`` depending on ``cfg.reward_mode``."""
    if not st.done:
        raise NotTerminalError("episode has not reached its budget")
    if influence is None:
        influence = terminal_influence(st, g_hidden, cfg, seed)
    if cfg.reward_mode == "opt_normalized":
        opt = opt_value(g_hidden, cfg.k_seeds, cfg.diffusion(0), cache=opt_cache)
        return influence / opt
    return (influence - st.goal) / st.goal


class DiscoveryEnv:
    """Holds the training graphs, goal source and OPT cache for repeated episodes."""

    def __init__(self, graphs, cfg: EpisodeConfig, goal_source=None, opt_cache=None):
        self.graphs = list(graphs)
        self.cfg = cfg
        self.goal_source = goal_source
        self.opt_cache = opt_cache
        self.state = None

    def reset(self, rng, graph_index=None):
        self.state = reset(self.graphs, self.cfg, self.goal_source, rng, graph_index)
        return self.state

    @property
    def hidden(self):
        return self.graphs[self.state.graph_index]

    def actions(self):
        return actions(self.state)

    def step(self, u):
        self.state = step(self.state, u, self.hidden)
        return self.state

    def influence(self, seed=0):
        return terminal_influence(self.state, self.hidden, self.cfg, seed)

    def reward(self, influence=None, seed=0):
        return terminal_reward(self.state, self.hidden, self.cfg, self.opt_cache, influence, seed)
