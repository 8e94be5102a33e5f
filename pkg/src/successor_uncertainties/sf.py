"""Successor features for fixed one-hot state-action embeddings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mdp import Experience, TabularMdp, policy_operator


@dataclass
class SuccessorTable:
    """Rows ``psi[s * A + a]`` with embedding ``phi[s * A + a]``."""

    psi: np.ndarray
    phi: np.ndarray
    gamma: float
    n_actions: int

    def row(self, s: int, a: int) -> np.ndarray:
        return self.psi[s * self.n_actions + a]

    def q_values(self, w: np.ndarray) -> np.ndarray:
        return (self.psi @ w).reshape(-1, self.n_actions)


def one_hot_embedding(env: TabularMdp) -> np.ndarray:
    return np.eye(env.n_state_actions)


def zero_table(env: TabularMdp, phi: np.ndarray | None = None) -> SuccessorTable:
    phi = one_hot_embedding(env) if phi is None else phi
    return SuccessorTable(np.zeros_like(phi, dtype=float), phi, env.gamma, env.n_actions)


def exact_sf(env: TabularMdp, policy: np.ndarray, phi: np.ndarray | None = None) -> SuccessorTable:
    """Solve ``(I - gamma P^pi) Psi = Phi`` for the successor features of ``policy``."""
    phi = one_hot_embedding(env) if phi is None else np.asarray(phi, dtype=float)
    M = sp.identity(env.n_state_actions, format="csc") - env.gamma * policy_operator(env, policy).tocsc()
    psi = spla.splu(M).solve(phi)
    if not np.all(np.isfinite(psi)):
        raise np.linalg.LinAlgError("singular successor-feature system")
    return SuccessorTable(np.asarray(psi), phi, env.gamma, env.n_actions)


def sf_bellman_residual(env: TabularMdp, policy: np.ndarray, table: SuccessorTable) -> float:
    backup = table.phi + env.gamma * (policy_operator(env, policy) @ table.psi)
    return float(np.max(np.abs(table.psi - backup)))


def td_sf_update(table: SuccessorTable, e: Experience, a_next, alpha: float) -> SuccessorTable:
    """One TD(0) step on row ``(e.s, e.a)``, in place.

    ``a_next`` is either an action index or a probability vector over actions
    (expected-SARSA target).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    A = table.n_actions
    i = e.s * A + e.a
    target = table.phi[i].copy()
    if not e.done:
        if np.ndim(a_next) == 0:
            target += table.gamma * table.psi[e.s_next * A + int(a_next)]
        else:
            rows = table.psi[e.s_next * A : (e.s_next + 1) * A]
            target += table.gamma * (np.asarray(a_next) @ rows)
    table.psi[i] += alpha * (target - table.psi[i])
    return table
