"""Successor Uncertainties agent (learned embeddings, posterior sampling)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import Experience, TabularMdp
from ..net import RowAdam, SuNetwork, su_grad_step
from ..posterior import PosteriorConfig, RewardPosterior
from .base import Agent, ReplayBuffer


@dataclass(frozen=True)
class SuAgentConfig:
    theta: float = 1e4
    beta: float = 1e-3
    zeta: float = 1.0
    hidden: int = 20
    learning_rate: float = 1e-2
    batch_size: int = 32
    grad_clip: float | None = None
    steps_per_episode: int = 10
    replay_capacity: int = 10_000
    optimizer: str = "sgd"
    psi_init: str = "zero"


class SuAgent(Agent):
    name = "su"

    def __init__(self, env: TabularMdp, rng: np.random.Generator, config: SuAgentConfig = SuAgentConfig()):
        super().__init__(env, rng)
        self.config = config
        self.net = SuNetwork(env.n_states, env.n_actions, config.hidden, env.gamma, rng, config.psi_init)
        self.posterior = RewardPosterior(PosteriorConfig(config.hidden, config.theta, config.beta, config.zeta))
        self.replay = ReplayBuffer(config.replay_capacity)
        self.w = np.zeros(config.hidden)
        self.optimizer = RowAdam(self.net) if config.optimizer == "adam" else None
        self.last_loss = None

    def begin_episode(self, rng=None) -> None:
        super().begin_episode(rng)
        self.w = self.posterior.sample_w(self.rng, center=self.net.w_hat)

    def q_values(self, s: int) -> np.ndarray:
        return self.net.psi_state(s) @ self.w

    def act(self, s: int) -> int:
        return int(np.argmax(self.q_values(s)))

    def observe(self, e: Experience) -> None:
        self.replay.add(e)
        self.posterior.precision_update(self.net.phi(e.s, e.a))

    def learn_step(self) -> None:
        if len(self.replay) == 0:
            return
        c = self.config
        batch = self.replay.get(self.replay.sample_index(self.rng, c.batch_size))
        sampled_w = self.posterior.sample_w(self.rng, center=self.net.w_hat, size=c.batch_size)
        self.last_loss = su_grad_step(self.net, batch, sampled_w, c.learning_rate, c.grad_clip, self.optimizer)

    def end_episode(self) -> None:
        for _ in range(self.config.steps_per_episode):
            self.learn_step()
        self.posterior.refresh_covariance()

    def greedy_policy_snapshot(self) -> np.ndarray:
        return np.argmax(self.net.q_table(), axis=1)
