"""Bayesian linear reward model with exponentially decayed evidence.

Prior ``w ~ N(0, theta I)``, likelihood ``r ~ N(<phi, w>, beta)``. After ``N``
observations the precision is

    Lambda_N = zeta^N / theta * I + 1/beta * sum_i zeta^(N-i) phi_i phi_i^T

which the recursive update ``Lambda <- zeta Lambda + phi phi^T / beta``
reproduces exactly. The mean path keeps the matching decayed moment vector
``b``; with ``zeta = 1`` this is ordinary ridge regression.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg


@dataclass(frozen=True)
class PosteriorConfig:
    dim: int
    theta: float = 1e4
    beta: float = 1e-3
    zeta: float = 1.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.theta <= 0 or self.beta <= 0:
            raise ValueError("theta and beta must be positive")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")


class RewardPosterior:
    """Gaussian belief over reward weights.

    ``Sigma_w`` and its Cholesky factor are only recomputed by
    :meth:`refresh_covariance` (once per episode in the agents), so between
    refreshes they lag behind ``Lambda``.
    """

    def __init__(self, config: PosteriorConfig):
        self.config = config
        d = config.dim
        self.Lambda = np.eye(d) / config.theta
        self.b = np.zeros(d)
        self.mu_w = np.zeros(d)
        self.Sigma_w = np.eye(d) * config.theta
        self.chol = linalg.CholeskyFactor(np.eye(d) * np.sqrt(config.theta))
        self.obs_count = 0

    @property
    def dim(self) -> int:
        return self.config.dim

    def precision_update(self, phi: np.ndarray) -> "RewardPosterior":
        phi = np.asarray(phi, dtype=np.float64)
        if not np.all(np.isfinite(phi)):
            raise ValueError("non-finite feature vector")
        c = self.config
        if c.zeta != 1.0:
            self.Lambda *= c.zeta
        self.Lambda += np.outer(phi, phi) / c.beta
        self.obs_count += 1
        return self

    def mean_update(self, phi: np.ndarray, r: float) -> "RewardPosterior":
        """Update the moment vector ``b`` and re-solve ``mu_w = Lambda^{-1} b``.

        Call after :meth:`precision_update` for the same observation.
        """
        c = self.config
        self.b = c.zeta * self.b + np.asarray(phi, dtype=np.float64) * (r / c.beta)
        self.mu_w = linalg.solve(self.Lambda, self.b)
        return self

    def observe(self, phi: np.ndarray, r: float) -> "RewardPosterior":
        return self.precision_update(phi).mean_update(phi, r)

    def refresh_covariance(self) -> "RewardPosterior":
        self.Sigma_w = linalg.spd_inverse(self.Lambda)
        self.chol = linalg.cholesky(self.Sigma_w)
        return self

    def sample_w(self, rng: np.random.Generator, center: np.ndarray | None = None, size: int | None = None) -> np.ndarray:
        """Draw from ``N(center, Sigma_w)``; ``center`` defaults to ``mu_w``."""
        mean = self.mu_w if center is None else center
        return linalg.mvn_sample(mean, self.chol, rng, size=size)

    def closed_form_precision(self, phis: np.ndarray) -> np.ndarray:
        """Evaluate the decayed precision formula directly for the rows of ``phis``."""
        c = self.config
        phis = np.atleast_2d(phis)
        n = len(phis)
        weights = c.zeta ** np.arange(n - 1, -1, -1, dtype=float)
        return (c.zeta ** n / c.theta) * np.eye(c.dim) + (phis.T * weights) @ phis / c.beta


def variance_nu(n, theta: float, beta: float):
    """Marginal variance of a one-hot coordinate observed ``n`` times."""
    if theta <= 0 or beta <= 0:
        raise ValueError("theta and beta must be positive")
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("n must be nonnegative")
    out = 1.0 / (1.0 / theta + n / beta)
    return float(out) if out.ndim == 0 else out
