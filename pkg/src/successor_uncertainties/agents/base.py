from __future__ import annotations

import numpy as np

from ..mdp import Experience, TabularMdp


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with optional per-item bootstrap masks."""

    def __init__(self, capacity: int = 10_000, n_masks: int = 0):
        self.capacity = capacity
        self.s = np.zeros(capacity, dtype=np.int64)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s_next = np.zeros(capacity, dtype=np.int64)
        self.done = np.zeros(capacity, dtype=bool)
        self.mask = np.zeros((n_masks, capacity), dtype=bool)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, e: Experience, mask: np.ndarray | None = None) -> None:
        i = self._pos
        self.s[i], self.a[i], self.r[i], self.s_next[i], self.done[i] = e.s, e.a, e.r, e.s_next, e.done
        if mask is not None:
            self.mask[:, i] = mask
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def get(self, idx: np.ndarray):
        return self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.done[idx]

    def sample_index(self, rng: np.random.Generator, batch_size: int) -> np.ndarray:
        return rng.integers(0, self.size, size=batch_size)


class Agent:
    """Episode-scoped agent interface.

    Posterior-sampling agents draw one value function in :meth:`begin_episode`
    and keep it fixed until the next call. :meth:`greedy_policy_snapshot` returns
    the action chosen in every state by the mean (non-sampled) model.
    """

    name = "agent"
    #: ``"greedy"``: solved once the mean policy reaches the goal;
    #: ``"first_success"``: solved at the first rewarded episode.
    solve_rule = "greedy"

    def __init__(self, env: TabularMdp, rng: np.random.Generator):
        self.env = env
        self.rng = rng

    def begin_episode(self, rng: np.random.Generator | None = None) -> None:
        if rng is not None:
            self.rng = rng

    def act(self, s: int) -> int:
        raise NotImplementedError

    def observe(self, e: Experience) -> None:
        pass

    def end_episode(self) -> None:
        pass

    def greedy_policy_snapshot(self) -> np.ndarray:
        return np.zeros(self.env.n_states, dtype=np.int64)


class UniformAgent(Agent):
    name = "uniform"
    solve_rule = "first_success"

    def act(self, s: int) -> int:
        return int(self.rng.integers(self.env.n_actions))
