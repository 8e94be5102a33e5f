import math

import numpy as np
import pytest

from successor_uncertainties import theory
from successor_uncertainties.mdp import make_binary_tree, uniform_policy
from successor_uncertainties.sf import exact_sf


class TestFactorizedBound:
    def test_l1_is_one_half(self):
        r = theory.check_factorized_bound(1, theory.symmetric_sampler("normal"), 50_000, seed=3)
        assert abs(r.estimate - 0.5) <= 3 * r.mc_stderr
        assert r.passed

    def test_l3_normal_close_to_eighth(self):
        r = theory.check_factorized_bound(3, theory.symmetric_sampler("normal"), 100_000)
        assert abs(r.estimate - 0.125) <= 3 * r.mc_stderr

    def test_state_offsets_do_not_matter(self):
        r = theory.check_factorized_bound(4, theory.symmetric_sampler("cauchy", center_seed=9), 100_000)
        assert r.passed

    def test_correlated_model_breaks_the_bound(self):
        up = make_binary_tree(6, 0).info["up_action"][0:12:2]

        def shared_sign(rng, n, L):
            # one coin decides every state at once: not factorized
            z = rng.standard_normal((n, 1))
            q = np.zeros((n, L, 2))
            q[:, np.arange(L), up] = z
            q[:, np.arange(L), 1 - up] = -z
            return q

        r = theory.check_factorized_bound(6, shared_sign, 20_000, action_seed=0)
        assert abs(r.estimate - 0.5) < 0.02
        assert not r.passed

    def test_bad_sampler_shape(self):
        with pytest.raises(ValueError):
            theory.check_factorized_bound(2, lambda rng, n, L: np.zeros((n, L)), 10)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            theory.symmetric_sampler("student")

    def test_ube_initial_samples(self):
        r = theory.check_factorized_bound(5, theory.ube_init_sampler(), 50_000)
        assert r.passed


class TestGumbel:
    def test_degenerate_target(self):
        q = theory.gumbel_policy_model([[1.0, 0.0]])(np.random.default_rng(0), 1000)
        assert np.all(np.argmax(q, axis=-1) == 0)

    def test_matching_tv(self):
        r = theory.check_gumbel_matching([[0.3, 0.7]], 100_000)
        assert r.passed and r.estimate < 0.02

    def test_affine_invariance(self):
        r = theory.check_gumbel_affine_invariance([[0.3, 0.7], [0.5, 0.5]], n_samples=20_000)
        assert r.passed and r.estimate == 0

    def test_invalid_probabilities(self):
        with pytest.raises(ValueError):
            theory.gumbel_policy_model([[0.6, 0.6]])

    def test_propagation_witness(self):
        r = theory.check_propagation_witness()
        assert r.passed
        # the Gumbel model's variance is pi^2 / 6 regardless of the reference
        assert r.estimate == pytest.approx(math.pi ** 2 / 6, rel=0.03)


class TestTiedActions:
    def test_sigmoid_d1(self):
        r = theory.check_tied_action_bdqn(1, 10, "sigmoid", 100_000)
        assert r.passed
        assert r.details["median_episodes"] <= 1

    def test_relu_bound(self):
        r = theory.check_tied_action_bdqn(10, 100, "relu", 100_000)
        assert r.passed
        assert r.bound_or_target == pytest.approx(2.0 ** -10 * (1 - 2.0 ** -10) ** 100)

    def test_bound_formula(self):
        assert theory.tied_action_success_bound(1, 10, "sigmoid") == 0.5
        assert theory.tied_action_success_bound(3, 7, "relu") == pytest.approx(0.125 * 0.875 ** 7)

    def test_sigmoid_success_decreases_towards_bound(self):
        # the 2^-d bound is length free but the success probability itself is not
        r = theory.check_tied_action_length_independence(3, (5, 50), "sigmoid", 100_000)
        p5, p50 = r.details["success"]
        assert p5 > p50 >= 0.125 - 3 * r.mc_stderr

    def test_geometric_median(self):
        assert theory.geometric_median(0.5) == 1
        assert theory.geometric_median(2.0 ** -10) == 710


class TestSuCovariance:
    def test_epsilon_values(self):
        assert theory.epsilon_n(50) < 1.6e-4
        assert theory.epsilon_n(50) == pytest.approx(0.75 ** 50 * math.exp(-1) + (1 - 0.75 ** 50) * math.exp(-8.75))

    def test_deep_states_meet_bound(self):
        for k in (2, 4, 6):
            r = theory.check_su_covariance(10, 50, 2000, k=k)
            assert r.passed, k

    def test_no_visits_all_prior(self):
        # with no data the subtree variance makes UP strictly more uncertain, so the condition always holds
        env = make_binary_tree(6, 0)
        psi = exact_sf(env, uniform_policy(env)).psi
        counts = np.zeros((env.n_states, 2))
        up, down = theory.su_covariance_condition(env, psi, counts, 4, 0, 1e4, 1e-3)
        assert up > down

    def test_bottom_state_fails_half_the_time(self):
        r = theory.check_su_covariance(6, 50, 4000, k=10)
        assert 0.35 < r.estimate < 0.65
        assert not r.passed

    def test_visit_counts_consistent(self):
        env = make_binary_tree(8, 0)
        counts = theory.visit_counts_from(env, 4, 50, np.random.default_rng(0))
        up = env.info["up_action"]
        assert counts[0, up[0]] == 50 and counts[2, up[2]] == 50
        assert counts[4].sum() == 50
        # visits flowing into s_6 equal UP visits at s_4
        assert counts[6].sum() == counts[4, up[4]]

    def test_lemma_equivalence(self):
        r = theory.check_lemma_equivalence(5, configs_per_state=10)
        assert r.passed

    def test_non_factorization(self):
        r = theory.check_su_non_factorization()
        assert r.passed and r.estimate >= 1e-6


class TestReports:
    def test_to_dict_uses_pass_key(self):
        d = theory.check_gumbel_matching([[0.5, 0.5]], 1000).to_dict()
        assert "pass" in d and "passed" not in d

    def test_deterministic(self):
        a = theory.check_factorized_bound(3, theory.symmetric_sampler("laplace"), 10_000, seed=5)
        b = theory.check_factorized_bound(3, theory.symmetric_sampler("laplace"), 10_000, seed=5)
        assert a.estimate == b.estimate

    def test_name_filter(self):
        reports = theory.run_all_oracles(n_samples=2000, names=["gumbel"])
        assert {r.name for r in reports} == {"gumbel-matching", "gumbel-affine"}
        with pytest.raises(ValueError):
            theory.run_all_oracles(names=["nope"])
