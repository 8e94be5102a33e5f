import numpy as np
import pytest

from successor_uncertainties.agents import (
    AGENTS,
    BdqnAgent,
    BootstrapAgent,
    EnsembleConfig,
    SuAgent,
    SuAgentConfig,
    UbeAgent,
    UniformAgent,
    make_agent,
)
from successor_uncertainties.agents.base import ReplayBuffer
from successor_uncertainties.harness import RunConfig, run_single
from successor_uncertainties.mdp import Experience, make_binary_tree, rollout, step
from successor_uncertainties.theory import geometric_median


def _episode(env, agent):
    agent.begin_episode()
    traj = rollout(env, agent.act)
    for e in traj:
        agent.observe(e)
    agent.end_episode()
    return traj


class TestReplayBuffer:
    def test_ring_overwrites_oldest(self):
        buf = ReplayBuffer(3)
        for i in range(5):
            buf.add(Experience(i, 0, 0.0, i + 1, False))
        assert len(buf) == 3
        assert sorted(buf.s.tolist()) == [2, 3, 4]

    def test_masks_stored(self):
        buf = ReplayBuffer(4, n_masks=2)
        buf.add(Experience(0, 1, 0.0, 1, True), np.array([True, False]))
        assert buf.mask[:, 0].tolist() == [True, False]


class TestRegistry:
    def test_all_names(self):
        assert set(AGENTS) == {"su", "bootstrap", "bdqn", "ube", "uniform"}

    def test_unknown_agent(self):
        with pytest.raises(ValueError):
            make_agent("dqn", make_binary_tree(2), np.random.default_rng(0))

    def test_unknown_option(self):
        with pytest.raises(ValueError):
            make_agent("su", make_binary_tree(2), np.random.default_rng(0), temperature=1.0)

    def test_uniform_takes_no_options(self):
        with pytest.raises(ValueError):
            make_agent("uniform", make_binary_tree(2), np.random.default_rng(0), K=3)


@pytest.mark.parametrize("name", ["su", "bootstrap", "bdqn", "ube"])
class TestPosteriorSamplingContract:
    def test_act_fixed_within_episode(self, name):
        env = make_binary_tree(6, 1)
        agent = make_agent(name, env, np.random.default_rng(0))
        for _ in range(3):
            _episode(env, agent)
        agent.begin_episode()
        first = [agent.act(s) for s in range(0, 12, 2)]
        again = [agent.act(s) for s in range(0, 12, 2)]
        assert first == again

    def test_snapshot_shape(self, name):
        env = make_binary_tree(4, 0)
        agent = make_agent(name, env, np.random.default_rng(1))
        _episode(env, agent)
        pol = agent.greedy_policy_snapshot()
        assert pol.shape == (env.n_states,)
        assert set(np.unique(pol)) <= {0, 1}


class TestSuAgent:
    def test_ties_go_to_first_action(self):
        env = make_binary_tree(3)
        agent = SuAgent(env, np.random.default_rng(0))
        agent.w = np.zeros(agent.config.hidden)
        assert agent.act(0) == 0

    def test_precision_updated_every_step(self):
        env = make_binary_tree(5, 0)
        agent = SuAgent(env, np.random.default_rng(0))
        agent.begin_episode()
        e = step(env, 0, agent.act(0))
        agent.observe(e)
        phi = agent.net.phi(e.s, e.a)
        expected = np.eye(agent.config.hidden) / agent.config.theta + np.outer(phi, phi) / agent.config.beta
        np.testing.assert_allclose(agent.posterior.Lambda, expected)

    def test_posterior_symmetric_before_reward(self):
        env = make_binary_tree(8, 0)
        agent = SuAgent(env, np.random.default_rng(0))
        for _ in range(5):
            traj = _episode(env, agent)
            assert all(e.r == 0 for e in traj)
        # no reward seen: the mean weights never move, so up and down are equally likely
        np.testing.assert_array_equal(agent.net.w_hat, 0.0)

    def test_tree_l1_smoke(self):
        hits = 0
        for seed in range(5):
            env = make_binary_tree(1, action_seed=seed)
            agent = SuAgent(env, np.random.default_rng(seed), SuAgentConfig())
            for _ in range(200):
                _episode(env, agent)
            hits += agent.greedy_policy_snapshot()[0] == env.info["up_action"][0]
        assert hits >= 4


class TestBootstrapAgent:
    def test_degenerate_ensemble_is_q_learning(self):
        env = make_binary_tree(2, 0)
        agent = BootstrapAgent(env, np.random.default_rng(0), EnsembleConfig(K=1, bootstrap_p=1.0, prior_weight=0.0))
        for _ in range(5):
            _episode(env, agent)
        assert agent.replay.mask[0, : len(agent.replay)].all()
        np.testing.assert_allclose(agent.q_table(), agent.net.q_all()[0])

    @pytest.mark.parametrize("kw", [dict(K=0), dict(bootstrap_p=0.0), dict(bootstrap_p=1.5), dict(prior_weight=-1.0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            EnsembleConfig(**kw)

    def test_priors_are_frozen(self):
        env = make_binary_tree(3, 0)
        agent = BootstrapAgent(env, np.random.default_rng(0))
        before = {k: v.copy() for k, v in agent.prior.params.items()}
        for _ in range(10):
            _episode(env, agent)
        for k, v in agent.prior.params.items():
            np.testing.assert_array_equal(v, before[k])


class TestBdqnAgent:
    def test_prior_sampling_factorized_across_actions(self):
        env = make_binary_tree(3, 0)
        agent = BdqnAgent(env, np.random.default_rng(0))
        draws = []
        for _ in range(2000):
            agent.begin_episode()
            draws.append(agent.w.copy())
        w = np.array(draws)
        c = np.corrcoef(w[:, 0, 0], w[:, 1, 0])[0, 1]
        assert abs(c) < 0.1

    def test_posterior_refit_matches_ridge(self):
        env = make_binary_tree(3, 0)
        agent = BdqnAgent(env, np.random.default_rng(0))
        for _ in range(5):
            _episode(env, agent)
        agent.fit_posterior()
        phi = agent.features()
        s, a, r, s_next, done = agent.replay.get(np.arange(len(agent.replay)))
        X = phi[s[a == 0]]
        y = r[a == 0]  # all rewards zero and the mean starts at zero
        c = agent.config
        ridge = np.linalg.solve(X.T @ X / c.beta + np.eye(c.hidden) / c.theta, X.T @ y / c.beta)
        np.testing.assert_allclose(agent.mu[0], ridge, atol=1e-8)


class TestUbeAgent:
    def test_prior_marginals_symmetric(self):
        env = make_binary_tree(5, 0)
        agent = UbeAgent(env, np.random.default_rng(0))
        q = agent.sample_q(np.random.default_rng(1), 100_000)
        p_first = np.mean(np.argmax(q[:, 0:10:2], axis=2) == 0, axis=0)
        np.testing.assert_allclose(p_first, 0.5, atol=3 * np.sqrt(0.25 / 100_000) + 1e-3)

    def test_variance_propagation_fixed_point(self):
        env = make_binary_tree(4, 0)
        agent = UbeAgent(env, np.random.default_rng(0))
        for _ in range(10):
            _episode(env, agent)
        from successor_uncertainties.mdp import policy_operator
        from successor_uncertainties.posterior import variance_nu
        from successor_uncertainties.agents.ube import _greedy_mixture

        P = policy_operator(env, _greedy_mixture(agent.q_mean))
        nu = variance_nu(agent.counts.ravel(), agent.config.theta, agent.config.beta)
        u = agent.u.ravel()
        np.testing.assert_allclose(u, nu + env.gamma ** 2 * (P @ u), rtol=1e-10)

    def test_counts_reduce_variance(self):
        env = make_binary_tree(3, 0)
        agent = UbeAgent(env, np.random.default_rng(0))
        u0 = agent.u.copy()
        for _ in range(20):
            _episode(env, agent)
        assert agent.u[0].max() < u0[0].max()


class TestUniformAgent:
    def test_geometric_median_l8(self):
        # log(1/2) / log(1 - 2^-8) = 177.1, so the smallest n with P(T <= n) >= 1/2 is 178
        assert geometric_median(2.0 ** -8) == 178
        assert geometric_median(2.0 ** -10) == 710

    def test_median_first_success_l8(self):
        n, p = 401, 2.0 ** -8
        eps = [run_single(RunConfig(env="tree", size=8, agent="uniform", seed=i, max_episodes=20_000)).episodes_to_solve
               for i in range(n)]
        m = geometric_median(p)
        density = p * (1 - p) ** m
        se = 1.0 / (2.0 * density * np.sqrt(n))
        assert abs(np.median(eps) - m) <= 3 * se

    def test_l1_median_is_one(self):
        eps = [run_single(RunConfig(env="tree", size=1, agent="uniform", seed=i)).episodes_to_solve for i in range(51)]
        assert np.median(eps) == 1
        assert isinstance(UniformAgent(make_binary_tree(1), np.random.default_rng(0)).act(0), int)
