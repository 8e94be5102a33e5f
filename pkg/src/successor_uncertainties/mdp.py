"""Tabular hard-exploration environments and exact policy evaluation.

Three environment families are provided:

* the binary tree of size ``L`` with a random per-state action->movement map,
* the same tree with *tied* actions (one map shared by every state),
* the ``L x L`` deep-sea style chain with a Bernoulli(0.5) action mask.

All built-in environments are deterministic and acyclic, so the linear systems
solved by :func:`exact_policy_eval` are well posed even for ``gamma = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

UP, DOWN = 0, 1
RIGHT, LEFT = 0, 1

__all__ = [
    "Experience",
    "TabularMdp",
    "make_binary_tree",
    "make_chain",
    "make_env",
    "step",
    "rollout",
    "uniform_policy",
    "deterministic_policy",
    "exact_policy_eval",
    "bellman_residual",
    "greedy_actions",
    "policy_operator",
]


class Experience(NamedTuple):
    s: int
    a: int
    r: float
    s_next: int
    done: bool


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Explicit finite MDP.

    ``transition`` is a sparse ``(n_states * n_actions, n_states)`` matrix whose
    row ``s * n_actions + a`` holds the next-state distribution of ``(s, a)``.
    ``info`` carries environment specific metadata (action maps, masks).
    """

    n_states: int
    n_actions: int
    transition: sp.csr_matrix
    reward_mean: np.ndarray
    terminal: np.ndarray
    start: int
    gamma: float
    horizon: int
    name: str = "mdp"
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        S, A = self.n_states, self.n_actions
        if self.transition.shape != (S * A, S):
            raise ValueError(f"transition has shape {self.transition.shape}, expected {(S * A, S)}")
        if self.reward_mean.shape != (S, A):
            raise ValueError("reward_mean must have shape (n_states, n_actions)")
        rows = np.asarray(self.transition.sum(axis=1)).ravel()
        if np.max(np.abs(rows - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to one")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        term = np.flatnonzero(self.terminal)
        if np.any(self.reward_mean[term] != 0.0):
            raise ValueError("terminal states must carry zero reward")
        if not 0 <= self.start < S:
            raise ValueError("start state out of range")
        # deterministic fast path for step(): -1 marks a stochastic row
        nnz = np.diff(self.transition.indptr)
        nxt = np.full(S * A, -1, dtype=np.int64)
        det = nnz == 1
        nxt[det] = self.transition.indices[self.transition.indptr[:-1][det]]
        object.__setattr__(self, "_next_state", nxt.reshape(S, A))

    @property
    def n_state_actions(self) -> int:
        return self.n_states * self.n_actions

    @property
    def next_state(self) -> np.ndarray:
        """``(S, A)`` table of successor states, ``-1`` where the row is stochastic."""
        return self._next_state  # type: ignore[attr-defined]

    @property
    def safety_cap(self) -> int:
        return 10 * self.horizon

    def is_terminal(self, s: int) -> bool:
        return bool(self.terminal[s])


def _deterministic_kernel(next_state: np.ndarray) -> sp.csr_matrix:
    S, A = next_state.shape
    rows = np.arange(S * A)
    return sp.csr_matrix((np.ones(S * A), (rows, next_state.ravel())), shape=(S * A, S))


def make_binary_tree(L: int, action_seed: int = 0, tied: bool = False, gamma: float = 0.99) -> TabularMdp:
    """Binary tree MDP with states ``s_0 .. s_{2L}``.

    From an even non-terminal state ``s_{2k}`` the UP movement leads to
    ``s_{2k+2}`` and DOWN to ``s_{2k+1}``. Odd states and ``s_{2L}`` are
    terminal. The only reward is 1 on the transition ``(s_{2L-2}, UP)``.

    ``info["up_action"][s]`` is the raw action index that moves UP in ``s``.
    """
    if L < 1:
        raise ValueError("tree size L must be >= 1")
    S, A = 2 * L + 1, 2
    rng = np.random.default_rng(action_seed)
    up_action = rng.integers(0, 2, size=S)
    if tied:
        up_action[:] = up_action[0]

    terminal = np.zeros(S, dtype=bool)
    terminal[1::2] = True
    terminal[2 * L] = True

    next_state = np.tile(np.arange(S)[:, None], (1, A))
    reward = np.zeros((S, A))
    for k in range(L):
        s = 2 * k
        u = up_action[s]
        next_state[s, u] = s + 2
        next_state[s, 1 - u] = s + 1
    reward[2 * L - 2, up_action[2 * L - 2]] = 1.0

    return TabularMdp(
        n_states=S,
        n_actions=A,
        transition=_deterministic_kernel(next_state),
        reward_mean=reward,
        terminal=terminal,
        start=0,
        gamma=gamma,
        horizon=L,
        name="tree-tied" if tied else "tree",
        info={"L": L, "up_action": up_action, "action_seed": action_seed, "tied": tied},
    )


def make_chain(L: int, mask_seed: int = 0, gamma: float = 1.0) -> TabularMdp:
    """Deep-sea chain on an ``L x L`` grid plus one absorbing terminal state.

    State ``row * L + col`` for the grid, ``L * L`` for the terminal sink.
    The agent starts top-left and falls one row per step. Raw action ``a``
    moves right in cell ``(row, col)`` iff ``a == mask[row, col]``. Moving right
    costs ``0.01 / L``; moving right in the right-most column additionally pays
    1, so the all-right policy returns exactly 0.99.
    """
    if L < 2:
        raise ValueError("chain size L must be >= 2")
    rng = np.random.default_rng(mask_seed)
    mask = rng.integers(0, 2, size=(L, L))
    S, A = L * L + 1, 2
    sink = L * L
    next_state = np.full((S, A), sink, dtype=np.int64)
    reward = np.zeros((S, A))
    cost = 0.01 / L
    for row in range(L):
        for col in range(L):
            s = row * L + col
            for a in range(A):
                right = a == mask[row, col]
                new_col = min(col + 1, L - 1) if right else max(col - 1, 0)
                if right:
                    reward[s, a] = -cost + (1.0 if col == L - 1 else 0.0)
                next_state[s, a] = sink if row == L - 1 else (row + 1) * L + new_col
    terminal = np.zeros(S, dtype=bool)
    terminal[sink] = True
    return TabularMdp(
        n_states=S,
        n_actions=A,
        transition=_deterministic_kernel(next_state),
        reward_mean=reward,
        terminal=terminal,
        start=0,
        gamma=gamma,
        horizon=L,
        name="chain",
        info={"L": L, "mask": mask, "mask_seed": mask_seed},
    )


def make_env(env: str, size: int, action_seed: int = 0, gamma: float | None = None) -> TabularMdp:
    """Build an environment from its config name (``tree``, ``tree-tied``, ``chain``)."""
    if env in ("tree", "tree-tied"):
        return make_binary_tree(size, action_seed, tied=env == "tree-tied", gamma=0.99 if gamma is None else gamma)
    if env == "chain":
        return make_chain(size, action_seed, gamma=1.0 if gamma is None else gamma)
    raise ValueError(f"unknown env {env!r}")


def step(env: TabularMdp, s: int, a: int, rng: np.random.Generator | None = None) -> Experience:
    """Take action ``a`` in non-terminal state ``s``."""
    if env.terminal[s]:
        raise ValueError(f"cannot step from terminal state {s}")
    s_next = int(env.next_state[s, a])
    if s_next < 0:
        row = env.transition.getrow(s * env.n_actions + a)
        if rng is None:
            raise ValueError("stochastic transition requires an rng")
        s_next = int(rng.choice(row.indices, p=row.data))
    return Experience(s, a, float(env.reward_mean[s, a]), s_next, bool(env.terminal[s_next]))


def rollout(env: TabularMdp, act, rng: np.random.Generator | None = None, max_steps: int | None = None) -> list[Experience]:
    """Run one episode with ``act(s) -> action``; the last experience is always ``done``."""
    cap = max_steps if max_steps is not None else min(env.horizon, env.safety_cap)
    s = env.start
    traj = []
    for t in range(cap):
        e = step(env, s, act(s), rng)
        if t == cap - 1 and not e.done:
            e = e._replace(done=True)
        traj.append(e)
        if e.done:
            break
        s = e.s_next
    return traj


def uniform_policy(env: TabularMdp) -> np.ndarray:
    return np.full((env.n_states, env.n_actions), 1.0 / env.n_actions)


def deterministic_policy(env: TabularMdp, actions: np.ndarray) -> np.ndarray:
    pi = np.zeros((env.n_states, env.n_actions))
    pi[np.arange(env.n_states), np.asarray(actions)] = 1.0
    return pi


def greedy_actions(q: np.ndarray) -> np.ndarray:
    """Row-wise argmax, ties to the smallest action index."""
    return np.argmax(q, axis=1)


def policy_operator(env: TabularMdp, policy: np.ndarray) -> sp.csr_matrix:
    """Sparse ``P^pi`` over state-action pairs; rows of terminal states are zero."""
    S, A = env.n_states, env.n_actions
    P = env.transition.tocoo()
    live = ~env.terminal[P.row // A] & ~env.terminal[P.col]
    rows, cols, vals = P.row[live], P.col[live], P.data[live]
    r = np.repeat(rows, A)
    c = np.repeat(cols, A) * A + np.tile(np.arange(A), len(cols))
    v = np.repeat(vals, A) * policy[np.repeat(cols, A), np.tile(np.arange(A), len(cols))]
    return sp.csr_matrix((v, (r, c)), shape=(S * A, S * A))


def exact_policy_eval(env: TabularMdp, policy: np.ndarray, reward: np.ndarray | None = None) -> np.ndarray:
    """Solve ``(I - gamma P^pi) Q = r`` and return ``Q`` with shape ``(S, A)``.

    ``reward`` overrides ``env.reward_mean`` (used by the successor-feature
    identity checks). Terminal states do not bootstrap.
    """
    r = env.reward_mean if reward is None else np.asarray(reward, dtype=float)
    M = sp.identity(env.n_state_actions, format="csc") - env.gamma * policy_operator(env, policy).tocsc()
    q = spla.spsolve(M, r.ravel())
    if not np.all(np.isfinite(q)):
        raise np.linalg.LinAlgError("singular policy-evaluation system")
    return np.asarray(q).reshape(env.n_states, env.n_actions)


def bellman_residual(env: TabularMdp, policy: np.ndarray, q: np.ndarray, reward: np.ndarray | None = None) -> float:
    """``max |Q - T^pi Q|``."""
    r = env.reward_mean if reward is None else reward
    backup = r.ravel() + env.gamma * (policy_operator(env, policy) @ q.ravel())
    return float(np.max(np.abs(q.ravel() - backup)))
