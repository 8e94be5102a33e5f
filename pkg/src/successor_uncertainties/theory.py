"""Executable Monte-Carlo oracles for the binary-tree exploration results.

Each ``check_*`` function is a pure function of its arguments and seed and
returns an :class:`OracleReport`. A report passes when its estimate respects
the bound within three Monte-Carlo standard errors; the standard error is
evaluated at the bound itself, so it does not shrink when the estimate sits
on the wrong side of an extreme probability.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .mdp import make_binary_tree, uniform_policy
from .posterior import variance_nu
from .sf import exact_sf

__all__ = [
    "OracleReport",
    "symmetric_sampler",
    "ube_init_sampler",
    "check_factorized_bound",
    "gumbel_policy_model",
    "check_gumbel_matching",
    "check_gumbel_affine_invariance",
    "check_propagation_witness",
    "check_tied_action_bdqn",
    "check_tied_action_length_independence",
    "tied_action_success_bound",
    "geometric_median",
    "epsilon_n",
    "variance_nu",
    "visit_counts_from",
    "su_covariance_condition",
    "check_su_covariance",
    "check_lemma_equivalence",
    "check_su_non_factorization",
    "run_all_oracles",
]

# A sampler returns ``(n, L, A)`` Q values for the decision states s_0, s_2, ..., s_{2L-2}.
QSampler = Callable[[np.random.Generator, int, int], np.ndarray]


@dataclass
class OracleReport:
    name: str
    estimate: float
    bound_or_target: float
    mc_stderr: float
    n_samples: int
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _binom_se(p: float, n: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / max(n, 1))


# -- factorized symmetric models -------------------------------------------

_FAMILIES = {
    "normal": lambda rng, size: rng.standard_normal(size),
    "cauchy": lambda rng, size: rng.standard_cauchy(size),
    "laplace": lambda rng, size: rng.laplace(0.0, 1.0, size),
    "uniform": lambda rng, size: rng.uniform(-1.0, 1.0, size),
    "logistic": lambda rng, size: rng.logistic(0.0, 1.0, size),
}


def symmetric_sampler(family: str, scale: float = 1.0, center_seed: int | None = None) -> QSampler:
    """I.i.d. symmetric marginals; optional random per-state centres ``c_s``.

    Within a state both actions share the centre, which is all the factorized
    bound needs.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(_FAMILIES)}")
    draw = _FAMILIES[family]

    def sample(rng: np.random.Generator, n: int, L: int) -> np.ndarray:
        q = scale * draw(rng, (n, L, 2))
        if center_seed is not None:
            q += np.random.default_rng(center_seed).normal(0.0, 10.0, size=(1, L, 1))
        return q

    return sample


def ube_init_sampler(theta: float = 1e4, beta: float = 1e-3, gamma: float = 0.99) -> QSampler:
    """Q samples drawn by the UBE-style agent before it has seen any data."""
    from .agents.ube import UbeAgent, UbeAgentConfig

    def sample(rng: np.random.Generator, n: int, L: int) -> np.ndarray:
        env = make_binary_tree(L, gamma=gamma)
        agent = UbeAgent(env, rng, UbeAgentConfig(theta=theta, beta=beta))
        return agent.sample_q(rng, n)[:, 0 : 2 * L : 2, :]

    return sample


def check_factorized_bound(L: int, marginal_sampler: QSampler, n_samples: int = 100_000,
                           seed: int | tuple[int, ...] = 0, action_seed: int = 0, name: str = "factorized-bound") -> OracleReport:
    """P(greedy policy executes the all-UP sequence) <= 2^-L under a factorized model."""
    env = make_binary_tree(L, action_seed)
    up = env.info["up_action"][0 : 2 * L : 2]
    rng = np.random.default_rng(seed)
    q = np.asarray(marginal_sampler(rng, n_samples, L))
    if q.shape != (n_samples, L, 2):
        raise ValueError(f"sampler returned shape {q.shape}, expected {(n_samples, L, 2)}")
    success = np.all(np.argmax(q, axis=2) == up, axis=1)
    est = float(success.mean())
    bound = 2.0 ** -L
    se = _binom_se(bound, n_samples)
    return OracleReport(name, est, bound, se, n_samples, est <= bound + 3 * se, {"L": L})


# -- Gumbel policy matching -------------------------------------------------

def _as_policy(p) -> np.ndarray:
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("each row of p must be a probability vector")
    return p


def gumbel_policy_model(p, scale: float = 1.0, loc: float = 0.0):
    """Sampler of ``Q = loc + scale * (g + log p)`` with ``g`` standard Gumbel.

    The greedy action of a draw is distributed as ``p`` (Gumbel-max), while
    each entry with ``p > 0`` has variance ``scale^2 pi^2 / 6``.
    """
    p = _as_policy(p)
    if scale <= 0:
        raise ValueError("scale must be positive")
    with np.errstate(divide="ignore"):
        logp = np.log(p)

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        g = rng.gumbel(size=(n,) + p.shape)
        return loc + scale * (g + logp)

    return sample


def _greedy_frequencies(q: np.ndarray) -> np.ndarray:
    n, S, A = q.shape
    greedy = np.argmax(q, axis=2)
    return np.stack([np.bincount(greedy[:, s], minlength=A) for s in range(S)]) / n


def check_gumbel_matching(p, n_samples: int = 100_000, seed: int = 0, scale: float = 1.0,
                          loc: float = 0.0, tol: float = 0.02) -> OracleReport:
    p = _as_policy(p)
    q = gumbel_policy_model(p, scale, loc)(np.random.default_rng(seed), n_samples)
    tv = 0.5 * np.abs(_greedy_frequencies(q) - p).sum(axis=1)
    se = float(np.max(0.5 * np.sqrt((p * (1 - p)).sum(axis=1) / n_samples)))
    est = float(tv.max())
    return OracleReport("gumbel-matching", est, tol, se, n_samples, est <= tol, {"scale": scale, "loc": loc})


def check_gumbel_affine_invariance(p, a: float = 3.0, b: float = 2.5, n_samples: int = 100_000,
                                   seed: int = 0) -> OracleReport:
    """``a + b Q`` with ``b > 0`` picks the same greedy action on every draw."""
    if b <= 0:
        raise ValueError("b must be positive")
    p = _as_policy(p)
    q = gumbel_policy_model(p)(np.random.default_rng(seed), n_samples)
    mismatch = float(np.mean(np.argmax(q, axis=2) != np.argmax(a + b * q, axis=2)))
    return OracleReport("gumbel-affine", mismatch, 0.0, 0.0, n_samples, mismatch == 0.0, {"a": a, "b": b})


def check_propagation_witness(mu=(0.0, 0.5), sigma=(1.0, 1.0), scale: float = 1.0,
                              n_samples: int = 100_000, seed: int = 0) -> OracleReport:
    """A Gumbel model that matches a Gaussian reference's greedy policy but not its variance.

    Reference: a single state whose two Q values are independent
    ``N(mu_a, sigma_a^2)``. The Gumbel model built from the reference greedy
    probabilities has per-entry variance ``scale^2 pi^2 / 6``; the report
    passes when policies agree (TV <= 0.02) and the variances differ by more
    than three standard errors.
    """
    mu, sigma = np.asarray(mu, float), np.asarray(sigma, float)
    p0 = stats.norm.cdf((mu[0] - mu[1]) / np.hypot(sigma[0], sigma[1]))
    p = np.array([p0, 1.0 - p0])
    q = gumbel_policy_model(p, scale)(np.random.default_rng(seed), n_samples)
    tv = float(0.5 * np.abs(_greedy_frequencies(q)[0] - p).sum())
    var_hat = float(np.mean(np.var(q[:, 0, :], axis=0, ddof=1)))
    # sd of a sample variance ~ sigma^2 sqrt((kurtosis - 1) / n); Gumbel excess kurtosis is 2.4
    se = (scale ** 2 * np.pi ** 2 / 6) * math.sqrt((3.0 + 2.4 - 1.0) / n_samples)
    ref = float(np.mean(sigma ** 2))
    ok = tv <= 0.02 and abs(var_hat - ref) > 3 * se
    return OracleReport("propagation-witness", var_hat, ref, se, n_samples, ok,
                        {"policy_tv": tv, "gumbel_variance": scale ** 2 * np.pi ** 2 / 6})


# -- tied-action trees ------------------------------------------------------

def tied_action_success_bound(d: int, L: int, activation: str) -> float:
    if activation == "sigmoid":
        return 2.0 ** -d
    if activation == "relu":
        return 2.0 ** -d * (1.0 - 2.0 ** -d) ** L
    raise ValueError(f"unknown activation {activation!r}")


def geometric_median(p: float) -> float:
    """Median of the number of trials up to the first success, ``ceil(-1/log2(1-p))``."""
    if not 0.0 < p <= 1.0:
        return math.inf
    if p == 1.0:
        return 1.0
    return float(max(1, math.ceil(math.log(0.5) / math.log1p(-p) - 1e-12)))


def _tied_success(d: int, L: int, activation: str, n_trials: int, rng: np.random.Generator,
                  sigma_u: float, sigma_w: float, chunk: int) -> np.ndarray:
    act = {"sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)), "relu": lambda x: np.maximum(x, 0.0)}[activation]
    up = make_binary_tree(L, tied=True).info["up_action"][0]
    out = np.empty(n_trials, dtype=bool)
    for lo in range(0, n_trials, chunk):
        m = min(chunk, n_trials - lo)
        phi = act(sigma_u * rng.standard_normal((m, L, d)))
        w = sigma_w * rng.standard_normal((m, 2, d))
        diff = np.einsum("mld,md->ml", phi, w[:, up] - w[:, 1 - up])
        out[lo : lo + m] = np.all(diff > 0.0, axis=1)  # exact ties count against UP
    return out


def check_tied_action_bdqn(d: int, L: int, activation: str = "sigmoid", n_trials: int = 100_000,
                           seed: int = 0, sigma_u: float = 1.0, sigma_w: float = 1.0,
                           chunk: int = 4096) -> OracleReport:
    """Prior-only ``Q(s, a) = <act(U 1_s), w_a>`` on the tied-action tree.

    The estimate is the per-episode probability that the greedy policy walks
    straight UP. ``details["median_episodes"]`` is the geometric median at the
    upper confidence value of that probability, compared with the median
    implied by the bound.
    """
    rng = np.random.default_rng(seed)
    est = float(_tied_success(d, L, activation, n_trials, rng, sigma_u, sigma_w, chunk).mean())
    bound = tied_action_success_bound(d, L, activation)
    se = _binom_se(bound, n_trials)
    details = {
        "d": d,
        "L": L,
        "activation": activation,
        "median_episodes": geometric_median(min(1.0, est + 3 * se)),
        "median_bound": -1.0 / math.log2(1.0 - bound) if bound < 1 else 1.0,
    }
    return OracleReport(f"tied-action-{activation}", est, bound, se, n_trials, est >= bound - 3 * se, details)


def check_tied_action_length_independence(d: int = 3, lengths=(5, 50), activation: str = "sigmoid",
                                          n_trials: int = 100_000, seed: int = 0) -> OracleReport:
    """Compare success probabilities at two tree sizes; passes iff they agree within 3 sigma."""
    ps = []
    for i, L in enumerate(lengths):
        rng = np.random.default_rng([seed, i])
        ps.append(float(_tied_success(d, L, activation, n_trials, rng, 1.0, 1.0, 4096).mean()))
    diff = abs(ps[0] - ps[1])
    se = math.hypot(_binom_se(ps[0], n_trials), _binom_se(ps[1], n_trials))
    return OracleReport("tied-action-length-independence", diff, 0.0, se, n_trials, diff <= 3 * se,
                        {"d": d, "lengths": list(lengths), "success": ps, "bound": 2.0 ** -d})


# -- successor-uncertainty covariance on the tree ---------------------------

def epsilon_n(N) -> float:
    """``0.75^N e^{-N/50} + (1 - 0.75^N) e^{-0.175 N}``."""
    N = np.asarray(N, dtype=float)
    a = 0.75 ** N
    out = a * np.exp(-N / 50.0) + (1.0 - a) * np.exp(-0.175 * N)
    return float(out) if out.ndim == 0 else out


def visit_counts_from(env, k: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """State-action visit counts after ``N`` uniform-policy episodes that reach ``s_k``.

    Returns an ``(S, A)`` array. Ancestor UP pairs on the path to ``s_k`` are
    credited ``N`` visits; the subtree below ``s_k`` is simulated.
    """
    L = env.info["L"]
    up = env.info["up_action"]
    counts = np.zeros((env.n_states, env.n_actions))
    for j in range(0, k, 2):
        counts[j, up[j]] += N
    levels = L - k // 2  # decision states from s_k down to s_{2L-2}
    # number of consecutive UP moves, truncated at the bottom of the tree
    ups = np.minimum(rng.geometric(0.5, size=N) - 1, levels)
    for m in range(levels):
        s = k + 2 * m
        counts[s, up[s]] += np.count_nonzero(ups > m)
        counts[s, 1 - up[s]] += np.count_nonzero(ups == m)
    return counts


def _cov_rows(psi: np.ndarray, nu: np.ndarray, i: int, j: int) -> float:
    return float(psi[i] @ (nu * psi[j]))


def su_covariance_condition(env, psi: np.ndarray, counts: np.ndarray, k: int, j: int,
                            theta: float, beta: float) -> tuple[float, float]:
    """``(Cov(Qup_k, Qup_j), Cov(Qdown_k, Qup_j))`` under one-hot embeddings."""
    A = env.n_actions
    up = env.info["up_action"]
    nu = variance_nu(counts.ravel(), theta, beta)
    iu, idn, ju = k * A + up[k], k * A + 1 - up[k], j * A + up[j]
    return _cov_rows(psi, nu, iu, ju), _cov_rows(psi, nu, idn, ju)


def check_su_covariance(L: int = 10, N: int = 50, n_resamples: int = 2000, seed: int = 0,
                        theta: float = 1e4, beta: float = 1e-3, gamma: float = 0.99,
                        k: int | None = None) -> OracleReport:
    """Frequency of ``Cov(Qup_k, Qup_0) > Cov(Qdown_k, Qup_0)`` over resampled visit counts.

    Exact uniform-policy successor features with one-hot embeddings. Each
    decision state ``s_k`` is checked separately with ``n_resamples`` draws;
    when ``k`` is None every ``s_2 .. s_{2L-4}`` is checked (the last decision
    state has no subtree and the bound's argument does not reach it). The
    report passes only if every checked state meets ``1 - eps_N - 3 se``;
    ``estimate`` is the worst per-state frequency.

    The published bound expands the variance with weight ``2^-m`` per subtree
    level, but squared successor features give ``(gamma / 2)^(2m)``. States
    a few levels above the bottom therefore fail more often than ``eps_N``.
    """
    if L < 3 and k is None:
        raise ValueError("need L >= 3 to cycle over interior states")
    env = make_binary_tree(L, gamma=gamma)
    psi = exact_sf(env, uniform_policy(env)).psi
    ks = [k] if k is not None else list(range(2, 2 * L - 2, 2))
    rng = np.random.default_rng(seed)
    eps = min(1.0, epsilon_n(N))
    se = _binom_se(eps, n_resamples)
    per_k = {}
    for kk in ks:
        hits = 0
        for _ in range(n_resamples):
            counts = visit_counts_from(env, kk, N, rng)
            c_up, c_down = su_covariance_condition(env, psi, counts, kk, 0, theta, beta)
            hits += c_up > c_down
        per_k[kk] = hits / n_resamples
    worst = min(per_k.values())
    failing = [kk for kk, f in per_k.items() if f < 1.0 - eps - 3 * se]
    return OracleReport("su-covariance", worst, 1.0 - eps, se, n_resamples * len(ks), not failing,
                        {"L": L, "N": N, "epsilon_N": eps, "frequency_by_k": per_k, "failing_k": failing})


def check_lemma_equivalence(L_max: int = 6, configs_per_state: int = 20, seed: int = 0,
                            theta: float = 1e4, beta: float = 1e-3, gamma: float = 0.99) -> OracleReport:
    """The covariance condition holds for one even ``j < k`` iff it holds for all of them.

    Scans every tree size ``2 <= L <= L_max``, every decision state ``s_k``
    with ``k >= 2`` and every even ``j < k`` under randomly drawn uniform
    visit counts. Differences within ``1e-12`` relative are treated as ties.
    """
    rng = np.random.default_rng(seed)
    cases = violations = 0
    for L in range(2, L_max + 1):
        env = make_binary_tree(L, action_seed=int(rng.integers(1 << 31)), gamma=gamma)
        psi = exact_sf(env, uniform_policy(env)).psi
        for k in range(2, 2 * L, 2):
            for _ in range(configs_per_state):
                counts = visit_counts_from(env, 0, int(rng.integers(0, 40)), rng)
                flags = []
                for j in range(0, k, 2):
                    c_up, c_down = su_covariance_condition(env, psi, counts, k, j, theta, beta)
                    flags.append(c_up - c_down > 1e-12 * max(abs(c_up), abs(c_down), 1e-300))
                cases += 1
                violations += not (all(flags) or not any(flags))
    return OracleReport("lemma-equivalence", violations / cases, 0.0, 0.0, cases, violations == 0,
                        {"L_max": L_max})


def check_su_non_factorization(L: int = 4, seed: int = 0, theta: float = 1e4, beta: float = 1e-3,
                               gamma: float = 0.99, threshold: float = 1e-6) -> OracleReport:
    """Largest off-diagonal entry of ``Psi Sigma_w Psi^T`` with every pair visited at least once."""
    env = make_binary_tree(L, gamma=gamma)
    psi = exact_sf(env, uniform_policy(env)).psi
    counts = np.random.default_rng(seed).integers(1, 20, size=psi.shape[0])
    cov = psi @ (variance_nu(counts, theta, beta)[:, None] * psi.T)
    off = np.abs(cov - np.diag(np.diag(cov))).max()
    return OracleReport("su-non-factorization", float(off), threshold, 0.0, 1, off >= threshold, {"L": L})


# -- registry ---------------------------------------------------------------

def run_all_oracles(seed: int = 0, n_samples: int = 100_000, names=None) -> list[OracleReport]:
    """Run every oracle (or the subset whose report names start with one of ``names``)."""
    jobs: list[tuple[str, Callable[[], OracleReport]]] = []
    for L in (1, 3, 8):
        for i, fam in enumerate(("normal", "cauchy", "laplace", "uniform")):
            # separate streams: laplace and uniform draws are monotone maps of the same uniforms
            jobs.append((f"factorized-bound-{fam}-L{L}",
                         lambda L=L, fam=fam, i=i: check_factorized_bound(
                             L, symmetric_sampler(fam, center_seed=L), n_samples, (seed, i),
                             name=f"factorized-bound-{fam}-L{L}")))
    jobs.append(("factorized-bound-ube-L8",
                 lambda: check_factorized_bound(8, ube_init_sampler(), n_samples, seed, name="factorized-bound-ube-L8")))
    jobs.append(("gumbel-matching", lambda: check_gumbel_matching([[0.3, 0.7], [0.1, 0.9], [1.0, 0.0]], n_samples, seed)))
    jobs.append(("gumbel-affine", lambda: check_gumbel_affine_invariance([[0.3, 0.7]], n_samples=n_samples, seed=seed)))
    jobs.append(("propagation-witness", lambda: check_propagation_witness(n_samples=n_samples, seed=seed)))
    jobs.append(("tied-action-sigmoid", lambda: check_tied_action_bdqn(1, 10, "sigmoid", n_samples, seed)))
    jobs.append(("tied-action-relu", lambda: check_tied_action_bdqn(10, 100, "relu", n_samples, seed)))
    jobs.append(("tied-action-length-independence",
                 lambda: check_tied_action_length_independence(3, (5, 50), "sigmoid", n_samples, seed)))
    jobs.append(("su-covariance", lambda: check_su_covariance(10, 50, 2000, seed)))
    jobs.append(("lemma-equivalence", lambda: check_lemma_equivalence(6, seed=seed)))
    jobs.append(("su-non-factorization", lambda: check_su_non_factorization(seed=seed)))
    if names:
        jobs = [(n, f) for n, f in jobs if any(n.startswith(x) for x in names)]
        if not jobs:
            raise ValueError(f"no oracle matches {names}")
    return [f() for _, f in jobs]
