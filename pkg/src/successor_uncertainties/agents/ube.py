"""Factorized-Gaussian Q model with propagated variances, in the style of UBE.

This is a tabular reconstruction: the mean is learned by Q-learning, the
variance solves ``u = nu(n) + gamma^2 P^pi u`` for the mean-greedy policy,
and each ``Q(s, a)`` is sampled independently once per episode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..mdp import Experience, TabularMdp, policy_operator
from ..posterior import variance_nu
from .base import Agent


@dataclass(frozen=True)
class UbeAgentConfig:
    theta: float = 1e4
    beta: float = 1e-3
    learning_rate: float = 0.1


def _greedy_mixture(q: np.ndarray) -> np.ndarray:
    """Uniform over the argmax set in every state."""
    best = q == q.max(axis=1, keepdims=True)
    return best / best.sum(axis=1, keepdims=True)


class UbeAgent(Agent):
    name = "ube"

    def __init__(self, env: TabularMdp, rng: np.random.Generator, config: UbeAgentConfig = UbeAgentConfig()):
        super().__init__(env, rng)
        self.config = config
        self.q_mean = np.zeros((env.n_states, env.n_actions))
        self.counts = np.zeros((env.n_states, env.n_actions))
        self.u = self.propagated_variance()
        self.q_sample = self.q_mean.copy()

    def propagated_variance(self) -> np.ndarray:
        env, c = self.env, self.config
        nu = variance_nu(self.counts.ravel(), c.theta, c.beta)
        P = policy_operator(env, _greedy_mixture(self.q_mean))
        M = sp.identity(env.n_state_actions, format="csc") - env.gamma ** 2 * P.tocsc()
        return np.asarray(spla.spsolve(M, nu)).reshape(self.q_mean.shape)

    def sample_q(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` independent Q tables from the current factorized model."""
        z = rng.standard_normal((size,) + self.q_mean.shape)
        return self.q_mean + np.sqrt(self.u) * z

    def begin_episode(self, rng=None) -> None:
        super().begin_episode(rng)
        self.q_sample = self.sample_q(self.rng, 1)[0]

    def act(self, s: int) -> int:
        return int(np.argmax(self.q_sample[s]))

    def observe(self, e: Experience) -> None:
        self.counts[e.s, e.a] += 1
        target = e.r + (0.0 if e.done else self.env.gamma * self.q_mean[e.s_next].max())
        self.q_mean[e.s, e.a] += self.config.learning_rate * (target - self.q_mean[e.s, e.a])

    def end_episode(self) -> None:
        self.u = self.propagated_variance()

    def greedy_policy_snapshot(self) -> np.ndarray:
        return np.argmax(self.q_mean, axis=1)
