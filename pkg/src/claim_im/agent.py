"""Scikit-learn style front end for training and evaluating discovery policies."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .deepwalk import WalkConfig
from .env import EpisodeConfig
from .qnet import Architecture
from .replay import CherConfig
from .trainer import TrainConfig, evaluate, train


class ClaimAgent(BaseEstimator):
    """Goal-conditioned Geometric-DQN discovery agent.

    All hyperparameters are flat constructor arguments so the estimator works
    with ``get_params``/``set_params``/``clone`` and flat config files.
    ``fit`` takes a list of :class:`~claim_im.graph.Graph` objects.

    Attributes
    ----------
    params_ : QParams
        Trained network weights.
    metrics_ : RunMetrics
        Per-episode training log.
    """

    def __init__(
        self,
        mode="cher",
        episodes=300,
        T=5,
        s_size=5,
        k_seeds=10,
        p=0.1,
        n_sims=100,
        eps_start=1.0,
        eps_end=0.1,
        eps_decay_fraction=0.5,
        gamma=1.0,
        target_sync_every=10,
        lr=1e-3,
        optimizer="sgd",
        capacity=5000,
        batch_size=32,
        pool_multiplier=3,
        lambda0=1.0,
        gamma_lambda=0.99,
        prox_c=None,
        walk_dim=32,
        walks_per_node=10,
        walk_length=40,
        window=5,
        negatives=5,
        walk_epochs=2,
        walk_lr=0.025,
        warm_start=True,
        hidden=64,
        clusters=8,
        fc_width=128,
        goal_samples=20,
        random_state=0,
    ):
        self.mode = mode
        self.episodes = episodes
        self.T = T
        self.s_size = s_size
        self.k_seeds = k_seeds
        self.p = p
        self.n_sims = n_sims
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_fraction = eps_decay_fraction
        self.gamma = gamma
        self.target_sync_every = target_sync_every
        self.lr = lr
        self.optimizer = optimizer
        self.capacity = capacity
        self.batch_size = batch_size
        self.pool_multiplier = pool_multiplier
        self.lambda0 = lambda0
        self.gamma_lambda = gamma_lambda
        self.prox_c = prox_c
        self.walk_dim = walk_dim
        self.walks_per_node = walks_per_node
        self.walk_length = walk_length
        self.window = window
        self.negatives = negatives
        self.walk_epochs = walk_epochs
        self.walk_lr = walk_lr
        self.warm_start = warm_start
        self.hidden = hidden
        self.clusters = clusters
        self.fc_width = fc_width
        self.goal_samples = goal_samples
        self.random_state = random_state

    def to_config(self) -> TrainConfig:
        seed = int(self.random_state or 0)
        return TrainConfig(
            episodes=self.episodes,
            eps_start=self.eps_start,
            eps_end=self.eps_end,
            eps_decay_fraction=self.eps_decay_fraction,
            gamma=self.gamma,
            target_sync_every=self.target_sync_every,
            mode=self.mode,
            lr=self.lr,
            optimizer=self.optimizer,
            warm_start=self.warm_start,
            goal_samples=self.goal_samples,
            rng_seed=seed,
            episode=EpisodeConfig(T=self.T, s_size=self.s_size, k_seeds=self.k_seeds,
                                  p=self.p, n_sims=self.n_sims),
            cher=CherConfig(capacity=self.capacity, k=self.batch_size, m=self.pool_multiplier,
                            lambda0=self.lambda0, gamma_lambda=self.gamma_lambda, c=self.prox_c),
            walk=WalkConfig(dim=self.walk_dim, walks_per_node=self.walks_per_node,
                            walk_length=self.walk_length, window=self.window,
                            negatives=self.negatives, epochs=self.walk_epochs,
                            learning_rate=self.walk_lr, rng_seed=seed),
            arch=Architecture(in_dim=self.walk_dim, hidden=self.hidden, clusters=self.clusters,
                              fc_width=self.fc_width),
        )

    def fit(self, graphs, y=None, callback=None):
        self.config_ = self.to_config()
        self.params_, self.metrics_ = train(graphs, self.config_, callback=callback)
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("ClaimAgent is not fitted yet")

    def evaluate(self, graphs, runs=100, seed=None, policy="qnet"):
        """Per-run influences of ``policy`` on each graph (see :func:`trainer.evaluate`)."""
        cfg = getattr(self, "config_", None) or self.to_config()
        params = None
        if policy == "qnet":
            self._check_fitted()
            params = self.params_
        return evaluate(policy, graphs, cfg, runs, seed=seed, params=params)

    def score(self, graphs, y=None, runs=100):
        """Mean influence of the greedy policy over all graphs and runs."""
        m = self.evaluate(graphs, runs)
        return float(np.mean([row["influence"] for row in m.evaluations]))
