"""Small numpy networks with hand-written gradients.

:class:`SuNetwork` is the tabular successor-uncertainties model:

* ``phi_hat(s, a) = g / max(|g|, eps)`` with ``g = relu(U[s] + U[S + a])``,
  i.e. one ReLU layer over the concatenated state and action one-hots,
* ``psi_hat(s, a)`` a zero-initialised table (linear in the joint one-hot),
* ``w_hat`` zero-initialised output weights shared by reward and Q heads.

:class:`QNetwork` is a batch of ``K`` one-hidden-layer ReLU Q-networks over
the state one-hot, used by the ensemble and BDQN baselines.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORM_EPS = 1e-8


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SuLossBreakdown:
    sf_loss: float
    reward_loss: float
    q_loss: float

    @property
    def total(self) -> float:
        return self.sf_loss + self.reward_loss + self.q_loss


@dataclass
class SparseRows:
    """Row-sparse gradient: ``values[i]`` belongs to row ``index[i]`` (unique)."""

    index: np.ndarray
    values: np.ndarray

    @classmethod
    def accumulate(cls, index: np.ndarray, values: np.ndarray) -> "SparseRows":
        uniq, inv = np.unique(index, return_inverse=True)
        out = np.zeros((len(uniq), values.shape[1]))
        np.add.at(out, inv, values)
        return cls(uniq, out)

    def dense(self, n_rows: int) -> np.ndarray:
        out = np.zeros((n_rows, self.values.shape[1]))
        out[self.index] = self.values
        return out

    def sq_norm(self) -> float:
        return float(np.sum(self.values ** 2))


@dataclass
class SuGradient:
    U: SparseRows
    psi: SparseRows
    w_hat: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(self.U.sq_norm() + self.psi.sq_norm() + np.sum(self.w_hat ** 2)))

    def scale(self, c: float) -> None:
        self.U.values *= c
        self.psi.values *= c
        self.w_hat *= c


def folded_xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    """Absolute value of Xavier-normal draws."""
    return np.abs(rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=shape))


class SuNetwork:
    def __init__(self, n_states: int, n_actions: int, hidden: int = 20, gamma: float = 0.99,
                 rng: np.random.Generator | None = None, psi_init: str = "zero"):
        rng = np.random.default_rng() if rng is None else rng
        self.n_states, self.n_actions, self.d, self.gamma = n_states, n_actions, hidden, gamma
        n_in = n_states + n_actions
        # stored as an embedding table: row i is the weight column of input unit i
        self.U = folded_xavier(rng, n_in, hidden, (n_in, hidden))
        self.psi = np.zeros((n_states * n_actions, hidden))
        self.w_hat = np.zeros(hidden)
        if psi_init == "phi":
            s, a = np.divmod(np.arange(n_states * n_actions), n_actions)
            self.psi = self.phi(s, a)
        elif psi_init == "random":
            bound = 1.0 / np.sqrt(n_states * n_actions)
            self.psi = rng.uniform(-bound, bound, self.psi.shape)
        elif psi_init != "zero":
            raise ValueError(f"unknown psi_init {psi_init!r}")

    # -- forward ---------------------------------------------------------
    def _pre(self, s, a):
        return self.U[s] + self.U[self.n_states + np.asarray(a)]

    def phi(self, s, a) -> np.ndarray:
        g = np.maximum(self._pre(s, a), 0.0)
        n = np.linalg.norm(g, axis=-1, keepdims=True)
        return g / np.maximum(n, NORM_EPS)

    def psi_rows(self, s, a) -> np.ndarray:
        return self.psi[np.asarray(s) * self.n_actions + np.asarray(a)]

    def psi_state(self, s) -> np.ndarray:
        """``(..., A, d)`` successor features of every action in ``s``."""
        A = self.n_actions
        s = np.asarray(s)
        return self.psi[(s * A)[..., None] + np.arange(A)]

    def forward(self, s, a):
        phi = self.phi(s, a)
        psi = self.psi_rows(s, a)
        return phi, psi, phi @ self.w_hat, psi @ self.w_hat

    def q_table(self, w: np.ndarray | None = None) -> np.ndarray:
        w = self.w_hat if w is None else w
        return (self.psi @ w).reshape(self.n_states, self.n_actions)

    def greedy_next(self, s_next, w) -> np.ndarray:
        """``argmax_z <psi(s', z), w_b>`` per item; ties to the smallest index."""
        q = np.einsum("bad,bd->ba", self.psi_state(s_next), np.atleast_2d(w))
        return np.argmax(q, axis=1)

    # -- loss ------------------------------------------------------------
    def targets(self, s_next, a_next, done):
        """Bootstrap targets ``(y_sf, y_q)``; zero for terminal transitions."""
        live = (~np.asarray(done, dtype=bool)).astype(float)[:, None]
        y_sf = self.gamma * self.psi_rows(s_next, a_next) * live
        return y_sf, y_sf @ self.w_hat

    def loss_and_grad(self, s, a, r, s_next, done, a_next, targets=None):
        """Summed three-term loss and its gradient with targets held fixed."""
        s, a, s_next = np.asarray(s), np.asarray(a), np.asarray(s_next)
        r = np.asarray(r, dtype=float)
        y_sf, y_q = self.targets(s_next, a_next, done) if targets is None else targets

        h = self._pre(s, a)
        g = np.maximum(h, 0.0)
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        denom = np.maximum(norm, NORM_EPS)
        phi = g / denom
        psi = self.psi_rows(s, a)

        e_r = phi @ self.w_hat - r
        e_sf = psi - phi - y_sf
        e_q = psi @ self.w_hat - r - y_q
        losses = SuLossBreakdown(float(np.sum(e_sf ** 2)), float(np.sum(e_r ** 2)), float(np.sum(e_q ** 2)))

        d_w = 2.0 * (e_r @ phi + e_q @ psi)
        d_psi = 2.0 * e_sf + 2.0 * e_q[:, None] * self.w_hat
        d_phi = 2.0 * e_r[:, None] * self.w_hat - 2.0 * e_sf
        # Jacobian of g -> g / |g|; below eps the denominator is constant
        radial = np.sum(phi * d_phi, axis=1, keepdims=True) * (norm > NORM_EPS)
        d_g = (d_phi - phi * radial) / denom
        d_h = d_g * (h > 0.0)

        rows = np.concatenate([s, self.n_states + a])
        grad = SuGradient(
            U=SparseRows.accumulate(rows, np.concatenate([d_h, d_h])),
            psi=SparseRows.accumulate(s * self.n_actions + a, d_psi),
            w_hat=d_w,
        )
        return losses, grad

    def loss(self, s, a, r, s_next, done, a_next, targets=None) -> SuLossBreakdown:
        return self.loss_and_grad(s, a, r, s_next, done, a_next, targets)[0]

    def apply(self, grad: SuGradient, learning_rate: float, grad_clip: float | None = None,
              optimizer: "RowAdam | None" = None) -> None:
        norm = grad.norm()
        if not np.isfinite(norm):
            raise NonFiniteGradientError("non-finite gradient in SU network")
        if grad_clip is not None and norm > grad_clip:
            grad.scale(grad_clip / norm)
        if optimizer is not None:
            optimizer.step(self, grad, learning_rate)
            return
        np.subtract.at(self.U, grad.U.index, learning_rate * grad.U.values)
        self.psi[grad.psi.index] -= learning_rate * grad.psi.values
        self.w_hat -= learning_rate * grad.w_hat


class RowAdam:
    """Adam with lazy row updates for the sparse tables (only touched rows move)."""

    def __init__(self, net: SuNetwork, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.b1, self.b2, self.eps = b1, b2, eps
        self.t = 0
        self.state = {k: (np.zeros_like(getattr(net, k)), np.zeros_like(getattr(net, k)))
                      for k in ("U", "psi", "w_hat")}

    def _update(self, param, key, idx, g, lr):
        m, v = self.state[key]
        c1, c2 = 1 - self.b1 ** self.t, 1 - self.b2 ** self.t
        m[idx] = self.b1 * m[idx] + (1 - self.b1) * g
        v[idx] = self.b2 * v[idx] + (1 - self.b2) * g * g
        param[idx] -= lr * (m[idx] / c1) / (np.sqrt(v[idx] / c2) + self.eps)

    def step(self, net: SuNetwork, grad: SuGradient, lr: float) -> None:
        self.t += 1
        self._update(net.U, "U", grad.U.index, grad.U.values, lr)
        self._update(net.psi, "psi", grad.psi.index, grad.psi.values, lr)
        self._update(net.w_hat, "w_hat", slice(None), grad.w_hat, lr)


def su_loss(net: SuNetwork, e, a_next) -> SuLossBreakdown:
    """Loss of a single experience tuple."""
    return net.loss([e.s], [e.a], [e.r], [e.s_next], [e.done], [a_next])


def su_grad_step(net: SuNetwork, batch, sampled_w: np.ndarray, learning_rate: float,
                 grad_clip: float | None = None, optimizer: RowAdam | None = None) -> SuLossBreakdown:
    """One SGD step on the summed batch loss.

    ``batch`` is a tuple of arrays ``(s, a, r, s_next, done)``; ``sampled_w`` holds one
    posterior draw per item, used only to pick the bootstrap action.
    """
    s, a, r, s_next, done = batch
    a_next = net.greedy_next(s_next, sampled_w)
    losses, grad = net.loss_and_grad(s, a, r, s_next, done, a_next)
    if learning_rate != 0.0:
        net.apply(grad, learning_rate, grad_clip, optimizer)
    return losses


@dataclass
class Adam:
    """Adam over a dict of dense parameter arrays."""

    lr: float = 1e-3
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1, c2 = 1 - self.b1 ** self.t, 1 - self.b2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class QNetwork:
    """``K`` independent MLPs ``Q_k(s, .) = relu(W1_k[s]) @ W2_k`` over the state one-hot.

    No bias terms. Parameters are stacked along the leading ``K`` axis so the whole
    ensemble is evaluated with a handful of einsums.
    """

    def __init__(self, K: int, n_states: int, n_actions: int, hidden: int = 20,
                 rng: np.random.Generator | None = None):
        rng = np.random.default_rng() if rng is None else rng
        self.K, self.n_states, self.n_actions, self.hidden = K, n_states, n_actions, hidden
        self.params = {
            "W1": rng.normal(0.0, np.sqrt(2.0 / (n_states + hidden)), (K, n_states, hidden)),
            "W2": rng.normal(0.0, np.sqrt(2.0 / (hidden + n_actions)), (K, hidden, n_actions)),
        }

    def hidden_features(self, s) -> np.ndarray:
        """``(K, B, hidden)`` post-activation features."""
        return np.maximum(self.params["W1"][:, np.asarray(s)], 0.0)

    def q(self, s) -> np.ndarray:
        """``(K, B, A)``."""
        return np.einsum("kbh,kha->kba", self.hidden_features(s), self.params["W2"])

    def q_all(self) -> np.ndarray:
        """``(K, S, A)`` for every state."""
        return np.einsum("ksh,kha->ksa", np.maximum(self.params["W1"], 0.0), self.params["W2"])

    def td_grad(self, s, a, target, weight):
        """Gradient of ``sum_k sum_b weight[k,b] (Q_k(s_b, a_b) - target[k,b])^2``."""
        W1, W2 = self.params["W1"], self.params["W2"]
        s, a = np.asarray(s), np.asarray(a)
        pre = W1[:, s]
        hid = np.maximum(pre, 0.0)
        W2a = np.transpose(W2[:, :, a], (0, 2, 1))  # (K, B, hidden)
        q = np.sum(hid * W2a, axis=2)
        err = weight * (q - target)
        loss = float(np.sum(weight * (q - target) ** 2))
        d_q = 2.0 * err  # (K, B)
        g_W2 = np.zeros_like(W2)
        onehot = np.eye(self.n_actions)[a]  # (B, A)
        g_W2 += np.einsum("kb,kbh,ba->kha", d_q, hid, onehot)
        d_pre = d_q[:, :, None] * W2a * (pre > 0.0)
        g_W1 = np.zeros_like(W1)
        for k in range(self.K):
            np.add.at(g_W1[k], s, d_pre[k])
        return loss, {"W1": g_W1, "W2": g_W2}
