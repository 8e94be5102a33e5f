"""Bootstrapped DQN with additive randomized prior networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import Experience, TabularMdp
from ..net import Adam, QNetwork
from .base import Agent, ReplayBuffer


@dataclass(frozen=True)
class EnsembleConfig:
    K: int = 10
    bootstrap_p: float = 0.75
    prior_weight: float = 0.1
    hidden: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 32
    steps_per_episode: int = 10
    replay_capacity: int = 10_000

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0.0 < self.bootstrap_p <= 1.0:
            raise ValueError("bootstrap_p must lie in (0, 1]")
        if self.prior_weight < 0:
            raise ValueError("prior_weight must be nonnegative")


class BootstrapAgent(Agent):
    """``Q_k = net_k + prior_weight * prior_k``; one member drives each episode.

    Every member trains on its own Bernoulli(bootstrap_p) share of the replay
    buffer (masks drawn once, at insertion) towards its own greedy target.
    The prior networks are never trained.
    """

    name = "bootstrap"

    def __init__(self, env: TabularMdp, rng: np.random.Generator, config: EnsembleConfig = EnsembleConfig()):
        super().__init__(env, rng)
        self.config = config
        c = config
        self.net = QNetwork(c.K, env.n_states, env.n_actions, c.hidden, rng)
        self.prior = QNetwork(c.K, env.n_states, env.n_actions, c.hidden, rng)
        self.optimizer = Adam(lr=c.learning_rate)
        self.replay = ReplayBuffer(c.replay_capacity, n_masks=c.K)
        self.member = 0

    def _q(self, s) -> np.ndarray:
        q = self.net.q(s)
        if self.config.prior_weight:
            q = q + self.config.prior_weight * self.prior.q(s)
        return q

    def begin_episode(self, rng=None) -> None:
        super().begin_episode(rng)
        self.member = int(self.rng.integers(self.config.K))

    def act(self, s: int) -> int:
        return int(np.argmax(self._q([s])[self.member, 0]))

    def observe(self, e: Experience) -> None:
        self.replay.add(e, self.rng.random(self.config.K) < self.config.bootstrap_p)

    def learn_step(self) -> float:
        c = self.config
        idx = self.replay.sample_index(self.rng, c.batch_size)
        s, a, r, s_next, done = self.replay.get(idx)
        weight = self.replay.mask[:, idx].astype(float)
        boot = np.max(self._q(s_next), axis=2) * (~done)
        target = r + self.env.gamma * boot
        if c.prior_weight:
            # the prior's contribution at (s, a) is fixed, so the trainable part chases the remainder
            prior_sa = self.prior.q(s)[:, np.arange(len(a)), a]
            target = target - c.prior_weight * prior_sa
        loss, grads = self.net.td_grad(s, a, target, weight)
        self.optimizer.step(self.net.params, grads)
        return loss

    def end_episode(self) -> None:
        if len(self.replay) == 0:
            return
        for _ in range(self.config.steps_per_episode):
            self.learn_step()

    def q_table(self) -> np.ndarray:
        """Ensemble-mean Q with priors included, shape ``(S, A)``."""
        q = self.net.q_all()
        if self.config.prior_weight:
            q = q + self.config.prior_weight * self.prior.q_all()
        return q.mean(axis=0)

    def greedy_policy_snapshot(self) -> np.ndarray:
        return np.argmax(self.q_table(), axis=1)
