import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from successor_uncertainties import linalg
from successor_uncertainties.posterior import PosteriorConfig, RewardPosterior, variance_nu


def _spd(rng, d):
    A = rng.normal(size=(d, d))
    return A @ A.T + d * np.eye(d)


class TestLinalg:
    def test_cholesky_reconstructs(self):
        A = _spd(np.random.default_rng(0), 6)
        f = linalg.cholesky(A)
        np.testing.assert_allclose(f.lower @ f.lower.T, A, rtol=1e-12)
        assert f.jitter_used == 0.0

    def test_jitter_rescues_semidefinite(self):
        x = np.arange(1.0, 4.0)
        f = linalg.cholesky(np.outer(x, x))
        assert f.jitter_used > 0

    def test_indefinite_raises(self):
        with pytest.raises(linalg.NotPositiveDefiniteError):
            linalg.cholesky(np.diag([1.0, -1.0]))

    def test_asymmetric_raises(self):
        with pytest.raises(ValueError):
            linalg.cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_solve_and_inverse(self):
        rng = np.random.default_rng(1)
        A = _spd(rng, 5)
        b = rng.normal(size=5)
        np.testing.assert_allclose(A @ linalg.solve(A, b), b, atol=1e-10)
        np.testing.assert_allclose(linalg.spd_inverse(A) @ A, np.eye(5), atol=1e-10)

    def test_mvn_sample_moments(self):
        rng = np.random.default_rng(2)
        cov = _spd(rng, 3)
        mean = np.array([1.0, -2.0, 0.5])
        x = linalg.mvn_sample(mean, linalg.cholesky(cov), rng, size=200_000)
        np.testing.assert_allclose(x.mean(axis=0), mean, atol=0.05)
        np.testing.assert_allclose(np.cov(x.T), cov, rtol=0.03)


class TestRewardPosterior:
    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(1, 40), zeta=st.floats(0.5, 1.0), seed=st.integers(0, 10_000))
    def test_recursive_precision_matches_closed_form(self, n, zeta, seed):
        rng = np.random.default_rng(seed)
        post = RewardPosterior(PosteriorConfig(dim=4, theta=10.0, beta=0.1, zeta=zeta))
        phis = rng.normal(size=(n, 4))
        for phi in phis:
            post.precision_update(phi)
        expected = post.closed_form_precision(phis)
        np.testing.assert_allclose(post.Lambda, expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())

    def test_mean_is_ridge_solution(self):
        rng = np.random.default_rng(3)
        cfg = PosteriorConfig(dim=3, theta=2.0, beta=0.5)
        post = RewardPosterior(cfg)
        X = rng.normal(size=(30, 3))
        y = X @ np.array([1.0, -1.0, 2.0]) + 0.1 * rng.normal(size=30)
        for x, r in zip(X, y):
            post.observe(x, r)
        ridge = np.linalg.solve(X.T @ X / cfg.beta + np.eye(3) / cfg.theta, X.T @ y / cfg.beta)
        np.testing.assert_allclose(post.mu_w, ridge, rtol=1e-9)

    def test_covariance_lags_until_refresh(self):
        post = RewardPosterior(PosteriorConfig(dim=2, theta=1.0, beta=1.0))
        post.precision_update(np.array([1.0, 0.0]))
        np.testing.assert_allclose(post.Sigma_w, np.eye(2))
        post.refresh_covariance()
        np.testing.assert_allclose(post.Sigma_w, np.diag([0.5, 1.0]))

    def test_sample_w_centre(self):
        post = RewardPosterior(PosteriorConfig(dim=2, theta=1e-8, beta=1.0))
        w = post.sample_w(np.random.default_rng(0), center=np.array([3.0, 4.0]))
        np.testing.assert_allclose(w, [3.0, 4.0], atol=1e-3)

    @pytest.mark.parametrize("kw", [dict(theta=0.0), dict(beta=-1.0), dict(zeta=1.5), dict(dim=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            PosteriorConfig(**{"dim": 2, **kw})

    def test_non_finite_feature_rejected(self):
        post = RewardPosterior(PosteriorConfig(dim=2))
        with pytest.raises(ValueError):
            post.precision_update(np.array([np.nan, 0.0]))


class TestVarianceNu:
    def test_prior_value(self):
        assert variance_nu(0, 1e4, 1e-3) == 1e4

    def test_one_visit_table_values(self):
        assert variance_nu(1, 1e4, 1e-3) == pytest.approx(9.99999e-4, rel=1e-6)

    def test_strictly_decreasing(self):
        v = variance_nu(np.arange(50), 1e4, 1e-3)
        assert np.all(np.diff(v) < 0)

    def test_matches_diagonal_posterior(self):
        counts = np.array([0, 1, 5])
        post = RewardPosterior(PosteriorConfig(dim=3, theta=3.0, beta=0.2))
        for i, n in enumerate(counts):
            for _ in range(n):
                post.precision_update(np.eye(3)[i])
        post.refresh_covariance()
        np.testing.assert_allclose(np.diag(post.Sigma_w), variance_nu(counts, 3.0, 0.2), rtol=1e-12)

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            variance_nu(-1, 1.0, 1.0)
