"""Bayesian last layer over a TD-trained state embedding, in the style of BDQN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..mdp import Experience, TabularMdp
from ..net import Adam, QNetwork
from .base import Agent, ReplayBuffer


@dataclass(frozen=True)
class BdqnAgentConfig:
    theta: float = 1e4
    beta: float = 1e-3
    hidden: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 32
    steps_per_episode: int = 10
    replay_capacity: int = 10_000


class BdqnAgent(Agent):
    """``Q(s, a) = <phi(s), w_a>`` with one Gaussian posterior per action.

    The embedding ``phi(s) = relu(W1[s])`` belongs to a single Q network trained
    by TD. At the start of each episode the per-action posteriors are refit on
    the whole replay buffer, regressing TD targets built from the posterior
    means, and one ``w_a`` is drawn per action.
    """

    name = "bdqn"

    def __init__(self, env: TabularMdp, rng: np.random.Generator, config: BdqnAgentConfig = BdqnAgentConfig()):
        super().__init__(env, rng)
        self.config = config
        self.net = QNetwork(1, env.n_states, env.n_actions, config.hidden, rng)
        self.optimizer = Adam(lr=config.learning_rate)
        self.replay = ReplayBuffer(config.replay_capacity)
        A, h = env.n_actions, config.hidden
        self.mu = np.zeros((A, h))
        self.chol = [np.sqrt(config.theta) * np.eye(h) for _ in range(A)]
        self.w = np.zeros((A, h))

    def features(self) -> np.ndarray:
        """``(S, hidden)`` embedding of every state."""
        return np.maximum(self.net.params["W1"][0], 0.0)

    def fit_posterior(self) -> None:
        c, A = self.config, self.env.n_actions
        phi = self.features()
        h = phi.shape[1]
        mu, chol = np.zeros((A, h)), []
        if len(self.replay):
            s, a, r, s_next, done = self.replay.get(np.arange(len(self.replay)))
            y = r + self.env.gamma * np.max(phi[s_next] @ self.mu.T, axis=1) * (~done)
        for act in range(A):
            prec = np.eye(h) / c.theta
            rhs = np.zeros(h)
            if len(self.replay):
                X = phi[s[a == act]]
                prec = prec + X.T @ X / c.beta
                rhs = X.T @ y[a == act] / c.beta
            mu[act] = linalg.solve(prec, rhs)
            chol.append(linalg.cholesky(linalg.spd_inverse(prec)).lower)
        self.mu, self.chol = mu, chol

    def begin_episode(self, rng=None) -> None:
        super().begin_episode(rng)
        self.fit_posterior()
        self.w = np.stack([linalg.mvn_sample(self.mu[a], self.chol[a], self.rng) for a in range(self.env.n_actions)])

    def act(self, s: int) -> int:
        return int(np.argmax(self.w @ self.features()[s]))

    def observe(self, e: Experience) -> None:
        self.replay.add(e)

    def learn_step(self) -> float:
        c = self.config
        s, a, r, s_next, done = self.replay.get(self.replay.sample_index(self.rng, c.batch_size))
        target = r + self.env.gamma * np.max(self.net.q(s_next)[0], axis=1) * (~done)
        loss, grads = self.net.td_grad(s, a, target[None], np.ones((1, len(s))))
        self.optimizer.step(self.net.params, grads)
        return loss

    def end_episode(self) -> None:
        if len(self.replay) == 0:
            return
        for _ in range(self.config.steps_per_episode):
            self.learn_step()

    def greedy_policy_snapshot(self) -> np.ndarray:
        return np.argmax(self.features() @ self.mu.T, axis=1)
