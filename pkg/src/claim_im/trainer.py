"""Training loop, evaluation protocol and query baselines."""

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_positive_int, child_rng
from .deepwalk import WalkConfig, deepwalk
from .diffusion import estimate_influence
from .env import DiscoveryEnv, EpisodeConfig, actions
from .exceptions import ConfigurationError
from .goal import GoalGenerator
from .graph import initial_observation
from .influence import OptCache, greedy_select
from .qnet import (
    Adam, Architecture, SGD, StateRepr, init_params, q_values, state_embedding, sync_target,
    td_update,
)
from .replay import CherConfig, ReplayBuffer, Transition, relabel_her, select_batch

logger = logging.getLogger(__name__)

MODES = ("geometric_dqn", "goal_directed", "her", "cher")

EPISODE_FIELDS = (
    "episode", "graph", "goal", "influence", "reward", "lambda", "epsilon", "loss", "buffer_size",
)
EVAL_FIELDS = ("graph", "run", "policy", "influence")


@dataclass
class TrainConfig:
    episodes: int = 300
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_decay_fraction: float = 0.5
    gamma: float = 1.0
    target_sync_every: int = 10
    mode: str = "cher"
    lr: float = 1e-3
    optimizer: str = "sgd"
    warm_start: bool = True
    goal_samples: int = 20
    rng_seed: int = 0
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    cher: CherConfig = field(default_factory=CherConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)
    arch: Architecture = field(default_factory=Architecture)

    def __post_init__(self):
        check_positive_int(self.episodes, "episodes", allow_zero=True)
        check_positive_int(self.target_sync_every, "target_sync_every")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("eps_start", "eps_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if not 0 < self.eps_decay_fraction <= 1:
            raise ConfigurationError("eps_decay_fraction must lie in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ConfigurationError("gamma must lie in (0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError("optimizer must be 'sgd' or 'adam'")
        if self.walk.dim != self.arch.in_dim:
            raise ConfigurationError("walk.dim must equal arch.in_dim")
        expected = "opt_normalized" if self.mode == "geometric_dqn" else "goal_normalized"
        if self.episode.reward_mode != expected:
            self.episode = replace(self.episode, reward_mode=expected)

    @property
    def uses_goal(self):
        return self.mode != "geometric_dqn"

    @property
    def relabels(self):
        return self.mode in ("her", "cher")

    def epsilon(self, episode):
        horizon = max(1.0, self.eps_decay_fraction * self.episodes)
        frac = min(1.0, episode / horizon)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class RunMetrics:
    episodes: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)

    def summary(self):
        """Mean and std of influence per (policy, graph) over evaluation runs."""
        out = {}
        for row in self.evaluations:
            out.setdefault((row["policy"], row["graph"]), []).append(row["influence"])
        return {
            key: (float(np.mean(v)), float(np.std(v)), np.asarray(v)) for key, v in out.items()
        }

    def write_episodes_csv(self, path):
        _write_csv(path, EPISODE_FIELDS, self.episodes)

    def write_evaluations_csv(self, path):
        _write_csv(path, EVAL_FIELDS, self.evaluations)


def _write_csv(path, fields, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


# -- policies ---------------------------------------------------------------

def baseline_random(st, rng):
    """Uniform choice over legal queries; None when nothing is left."""
    legal = actions(st)
    if not legal:
        return None
    return legal[int(rng.integers(len(legal)))]


def _observed_neighbors(sub, u):
    return {b if a == u else a for a, b in sub.edges if u in (a, b)}


def baseline_change(st, rng):
    """Alternate a random legal node with a random legal neighbour of the last pick."""
    legal = actions(st)
    if not legal:
        return None
    queried = st.sub.queried
    if len(queried) % 2 == 1:
        cands = sorted(_observed_neighbors(st.sub, queried[-1]).intersection(legal))
        if cands:
            return cands[int(rng.integers(len(cands)))]
    return legal[int(rng.integers(len(legal)))]


class QPolicy:
    """Epsilon-greedy over ``Q(s, phi(u), g)``."""

    needs_embeddings = True

    def __init__(self, params, use_goal=True, epsilon=0.0):
        self.params = params
        self.use_goal = use_goal
        self.epsilon = epsilon

    def choose(self, st, state, table, rng):
        legal = actions(st)
        if not legal:
            return None
        if self.epsilon > 0 and rng.random() < self.epsilon:
            return legal[int(rng.integers(len(legal)))]
        embs = table.matrix(legal)
        g = st.goal if self.use_goal else 0.0
        q = q_values(self.params, state, embs, g)
        return legal[int(np.argmax(q))]


# -- episodes ----------------------------------------------------------------

def featurize(sub, table):
    order = tuple(sorted(sub.nodes))
    g = sub.as_graph()
    return StateRepr(table.matrix(order), g.adjacency_matrix(order), order)


class _Embedder:
    def __init__(self, walk_cfg, rng, warm_start):
        self.cfg = walk_cfg
        self.rng = rng
        self.warm_start = warm_start
        self.table = None

    def __call__(self, sub):
        init = self.table if self.warm_start else None
        self.table = deepwalk(sub.as_graph(), self.cfg, rng=self.rng, init=init)
        return self.table


def run_episode(env: DiscoveryEnv, policy, cfg: TrainConfig, rng_env, rng_policy, embedder=None,
                diffusion_seed=0, graph_index=None, online_params=None, with_reward=True):
    """Roll out ``T`` queries; returns ``(transitions, influence, state)``.

    ``policy`` is a :class:`QPolicy` or a baseline callable ``(state, rng)``.
    Transitions are only assembled when the policy uses embeddings.
    """
    st = env.reset(rng_env, graph_index)
    use_q = getattr(policy, "needs_embeddings", False)
    goal_in = st.goal if cfg.uses_goal else 0.0
    traj = []
    if use_q:
        table = embedder(st.sub)
        state = featurize(st.sub, table)
    for t in range(cfg.episode.T):
        if use_q:
            u = policy.choose(st, state, table, rng_policy)
            a_emb = table[u] if u is not None else np.zeros(table.dim)
        else:
            u = policy(st, rng_policy)
        st = env.step(u)
        if not use_q:
            continue
        terminal = t == cfg.episode.T - 1
        if terminal:
            next_state, next_acts, next_embs = None, (), np.zeros((0, table.dim))
        else:
            table = embedder(st.sub)
            next_state = featurize(st.sub, table)
            next_acts = actions(st)
            next_embs = table.matrix(next_acts) if next_acts else np.zeros((0, table.dim))
        s_emb = state_embedding(online_params, state) if online_params is not None else None
        traj.append(Transition(
            state=state, action_emb=np.array(a_emb), reward=0.0, goal=goal_in,
            next_state=next_state, next_action_embs=next_embs, state_emb=s_emb,
            terminal=terminal, action=u, next_actions=next_acts,
        ))
        state = next_state
    influence = env.influence(diffusion_seed)
    if traj and with_reward:
        reward = env.reward(influence)
        traj = [replace(tr, achieved_goal=influence) for tr in traj]
        traj[-1] = replace(traj[-1], reward=reward)
    return traj, influence, env.state


# -- goal estimates ---------------------------------------------------------------

def graph_estimates(g, cfg: EpisodeConfig, samples, rng):
    """True size statistics plus the mean greedy influence from random start sets."""
    dcfg = cfg.diffusion(0)
    vals = []
    for _ in range(samples):
        s = rng.choice(np.asarray(g.node_ids), size=cfg.s_size, replace=False)
        sub = initial_observation(g, s.tolist())
        seeds = greedy_select(sub.as_graph(), cfg.k_seeds, dcfg).seeds
        vals.append(estimate_influence(g, seeds, dcfg))
    return float(len(g)), float(g.edge_count), float(np.mean(vals))


class _ConstantGoal:
    def __init__(self, value):
        self.value = value

    def goal(self, n_s):
        return self.value


def build_goal_generators(graphs, cfg: EpisodeConfig, samples, seed):
    gens = []
    for i, g in enumerate(graphs):
        if len(g) <= cfg.s_size:
            # the start set covers the whole graph, so the goal is the graph itself
            gens.append(_ConstantGoal(float(len(g))))
            continue
        v, e, i_est = graph_estimates(g, cfg, samples, child_rng(seed, f"goal-{i}"))
        gens.append(GoalGenerator(v, e, i_est, cfg.s_size).fit())
    return gens


# -- training --------------------------------------------------------------------

def _make_optimizer(cfg):
    return Adam(cfg.lr) if cfg.optimizer == "adam" else SGD(cfg.lr)


def initial_params(graphs, cfg: TrainConfig):
    v_mean = float(np.mean([len(g) for g in graphs])) if graphs else 1.0
    arch = replace(cfg.arch, goal_scale=1.0 / v_mean)
    return init_params(arch, child_rng(cfg.rng_seed, "init"))


def train(graphs, cfg: TrainConfig, callback=None, buffer=None):
    """Run the full training loop; returns ``(params, RunMetrics)``.

    ``callback`` is called with each episode's metrics row. ``buffer`` lets the
    caller supply (and afterwards inspect) the replay buffer.
    """
    graphs = list(graphs)
    if not graphs:
        raise ConfigurationError("no training graphs")
    for g in graphs:
        if len(g) < cfg.episode.s_size:
            raise ConfigurationError("training graph smaller than s_size")
    seed = cfg.rng_seed
    params = initial_params(graphs, cfg)
    metrics = RunMetrics()
    if cfg.episodes == 0:
        return params, metrics

    goal_source = build_goal_generators(graphs, cfg.episode, cfg.goal_samples, seed)
    cher = cfg.cher
    if cher.c is None:
        cher = replace(cher, c=2.0 * max(len(g) for g in graphs))
    env = DiscoveryEnv(graphs, cfg.episode, goal_source, OptCache())
    rng_env = child_rng(seed, "env")
    rng_policy = child_rng(seed, "policy")
    rng_replay = child_rng(seed, "replay")
    rng_diff = child_rng(seed, "diffusion")
    embedder = _Embedder(cfg.walk, child_rng(seed, "walks"), cfg.warm_start)
    optimizer = _make_optimizer(cfg)

    target = sync_target(params)
    target_cache = {}
    buf = ReplayBuffer(cher.capacity) if buffer is None else buffer
    lam = cher.lambda0
    for ep in range(cfg.episodes):
        eps = cfg.epsilon(ep)
        policy = QPolicy(params, cfg.uses_goal, eps)
        embedder.table = None
        traj, influence, st = run_episode(
            env, policy, cfg, rng_env, rng_policy, embedder,
            diffusion_seed=int(rng_diff.integers(2**31)),
            online_params=params if cfg.mode == "cher" else None,
        )
        buf.extend(traj)
        if cfg.relabels:
            buf.extend(relabel_her(traj))
        losses = []
        for _ in range(cfg.episode.T):
            if cfg.mode == "cher":
                batch = select_batch(buf, cher, lam, rng_replay)
            else:
                batch = buf.sample_uniform(cher.k, rng_replay)
            params, loss = td_update(params, target, batch, cfg.gamma,
                                     optimizer=optimizer, target_cache=target_cache)
            losses.append(loss)
        row = {
            "episode": ep, "graph": st.graph_index, "goal": float(st.goal),
            "influence": float(influence), "reward": float(traj[-1].reward),
            "lambda": float(lam), "epsilon": float(eps), "loss": float(np.mean(losses)),
            "buffer_size": len(buf),
        }
        if cfg.mode == "cher":
            # closed form keeps lambda exactly lambda0 * gamma**n
            lam = cher.lambda0 * cher.gamma_lambda ** (ep + 1)
        if (ep + 1) % cfg.target_sync_every == 0:
            target = sync_target(params)
            target_cache.clear()
        metrics.episodes.append(row)
        if callback is not None:
            callback(row)
        logger.debug("episode %d: %s", ep, row)
    return params, metrics


def make_policy(policy, params=None, use_goal=True):
    if policy == "random":
        return baseline_random
    if policy == "change":
        return baseline_change
    if policy in ("checkpoint", "qnet"):
        if params is None:
            raise ConfigurationError("a Q-network policy needs parameters")
        return QPolicy(params, use_goal, 0.0)
    if callable(policy) or isinstance(policy, QPolicy):
        return policy
    raise ConfigurationError(f"unknown policy {policy!r}")


def evaluate(policy, graphs, cfg: TrainConfig, runs, seed=None, params=None, policy_name=None,
             goal_source=None):
    """Average terminal influence over ``runs`` fresh start sets per graph.

    Start sets and diffusion seeds come from streams that do not depend on the
    policy, so two policies evaluated with the same ``seed`` see identical
    start sets (paired comparison).
    """
    seed = cfg.rng_seed if seed is None else seed
    pol = make_policy(policy, params, cfg.uses_goal)
    name = policy_name or (policy if isinstance(policy, str) else "custom")
    graphs = list(graphs)
    if goal_source is None and cfg.uses_goal:
        goal_source = build_goal_generators(graphs, cfg.episode, cfg.goal_samples, seed)
    env = DiscoveryEnv(graphs, cfg.episode, goal_source)
    metrics = RunMetrics()
    for gi in range(len(graphs)):
        rng_env = child_rng(seed, f"eval-env-{gi}")
        rng_diff = child_rng(seed, f"eval-diffusion-{gi}")
        rng_policy = child_rng(seed, f"eval-policy-{gi}")
        embedder = _Embedder(cfg.walk, child_rng(seed, f"eval-walks-{gi}"), cfg.warm_start)
        for r in range(runs):
            embedder.table = None
            _, influence, _ = run_episode(
                env, pol, cfg, rng_env, rng_policy, embedder,
                diffusion_seed=int(rng_diff.integers(2**31)), graph_index=gi, with_reward=False,
            )
            metrics.evaluations.append(
                {"graph": gi, "run": r, "policy": name, "influence": float(influence)}
            )
    return metrics
