import numpy as np
import pytest

from successor_uncertainties.mdp import (
    exact_policy_eval,
    make_binary_tree,
    make_chain,
    make_env,
    policy_operator,
    rollout,
    step,
    uniform_policy,
)


def _up_path(env):
    up = env.info["up_action"]
    return lambda s: int(up[s])


class TestBinaryTree:
    def test_shapes_and_terminals(self):
        env = make_binary_tree(4)
        assert env.n_states == 9 and env.n_actions == 2
        assert env.terminal[1::2].all()
        assert env.terminal[8]
        assert not env.terminal[0:8:2].any()

    def test_all_up_reaches_reward(self):
        env = make_binary_tree(6, action_seed=3)
        traj = rollout(env, _up_path(env))
        assert len(traj) == 6
        assert traj[-1].r == 1.0 and traj[-1].s_next == 12
        assert sum(e.r for e in traj) == 1.0

    def test_down_terminates_without_reward(self):
        env = make_binary_tree(5, action_seed=1)
        up = env.info["up_action"]
        e = step(env, 0, 1 - up[0])
        assert e.done and e.s_next == 1 and e.r == 0.0

    def test_action_map_is_seeded(self):
        a = make_binary_tree(20, action_seed=7).info["up_action"]
        b = make_binary_tree(20, action_seed=7).info["up_action"]
        c = make_binary_tree(20, action_seed=8).info["up_action"]
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_tied_actions_share_mapping(self):
        up = make_binary_tree(10, action_seed=5, tied=True).info["up_action"]
        assert np.all(up[0:20:2] == up[0])

    def test_invalid_size(self):
        with pytest.raises(ValueError):
            make_binary_tree(0)

    def test_step_from_terminal_raises(self):
        env = make_binary_tree(2)
        with pytest.raises(ValueError):
            step(env, 1, 0)


class TestChain:
    def test_all_right_returns_099(self):
        env = make_chain(8, mask_seed=2)
        mask = env.info["mask"]
        L = 8
        act = lambda s: int(mask[s // L, s % L])
        traj = rollout(env, act)
        assert len(traj) == L
        assert sum(e.r for e in traj) == pytest.approx(0.99)

    def test_left_is_free(self):
        env = make_chain(5, mask_seed=0)
        mask = env.info["mask"]
        e = step(env, 0, 1 - int(mask[0, 0]))
        assert e.r == 0.0 and e.s_next == 5

    def test_other_policies_do_not_reach_099(self):
        env = make_chain(4, mask_seed=1)
        rng = np.random.default_rng(0)
        for _ in range(200):
            traj = rollout(env, lambda s: int(rng.integers(2)))
            ret = sum(e.r for e in traj)
            assert ret <= 0.0 + 1e-12 or ret == pytest.approx(0.99)


class TestPolicyEvaluation:
    def test_uniform_root_value_tree(self):
        L = 5
        env = make_binary_tree(L, gamma=1.0)
        q = exact_policy_eval(env, uniform_policy(env))
        up = env.info["up_action"][0]
        # reach s_{2L-2} with prob 2^-(L-1) after taking UP, then UP with prob 1/2
        assert q[0, up] == pytest.approx(2.0 ** -(L - 1))
        assert q[0, 1 - up] == 0.0

    def test_policy_operator_rows_are_substochastic(self):
        env = make_env("chain", 5)
        P = policy_operator(env, uniform_policy(env))
        sums = np.asarray(P.sum(axis=1)).ravel()
        assert np.all((np.abs(sums - 1.0) < 1e-12) | (sums == 0.0))

    def test_make_env_unknown(self):
        with pytest.raises(ValueError):
            make_env("grid", 3)
