"""Dense float64 kernels backing the reward posterior and the oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def _check_square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def cholesky(A: np.ndarray, jitter_schedule=JITTER_LADDER) -> CholeskyFactor:
    """Lower Cholesky factor of ``A + jitter * I``, escalating jitter on failure."""
    A = _check_square(A)
    scale = max(np.max(np.abs(A)), 1.0)
    if np.max(np.abs(A - A.T)) > 1e-9 * scale:
        raise ValueError("matrix is not symmetric")
    eye = np.eye(A.shape[0])
    for jitter in jitter_schedule:
        try:
            return CholeskyFactor(np.linalg.cholesky(A + jitter * eye), float(jitter))
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(f"not positive definite after jitter {jitter_schedule[-1]:g}")


def mvn_sample(mean: np.ndarray, chol: CholeskyFactor | np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``mean + L z`` with ``z`` standard normal; ``size`` adds a leading batch axis."""
    lower = chol.lower if isinstance(chol, CholeskyFactor) else np.asarray(chol)
    mean = np.asarray(mean, dtype=np.float64)
    if lower.shape != (mean.shape[-1], mean.shape[-1]):
        raise ValueError("mean and factor dimensions differ")
    if size is None:
        return mean + lower @ rng.standard_normal(mean.shape[-1])
    return mean + rng.standard_normal((size, mean.shape[-1])) @ lower.T


def solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve an SPD system through its Cholesky factor."""
    f = cholesky(A, jitter_schedule=(0.0,))
    y = solve_triangular(f.lower, b, lower=True)
    return solve_triangular(f.lower.T, y, lower=False)


def spd_inverse(A: np.ndarray, jitter_schedule=JITTER_LADDER) -> np.ndarray:
    """Inverse of an SPD matrix, symmetrized."""
    f = cholesky(A, jitter_schedule)
    inv_lower = solve_triangular(f.lower, np.eye(f.dim), lower=True)
    inv = inv_lower.T @ inv_lower
    return 0.5 * (inv + inv.T)


def rank1_update(A: np.ndarray, x: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Return ``A + scale * x x^T``."""
    x = np.asarray(x, dtype=np.float64)
    return A + scale * np.outer(x, x)
