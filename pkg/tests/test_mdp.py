import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weakbellman.mdp import (
    QTable,
    TabularMdp,
    TabularPolicy,
    bellman_error_table,
    exact_q,
    gridworld,
    gridworld_policy,
    load_mdp,
    occupancy,
    policy_value,
    random_mdp,
    random_policy,
    rescale_q,
    save_mdp,
    two_armed_bandit,
    value_from_start,
)

seeds = st.integers(0, 2**31 - 1)


def _instance(seed, S=4, A=3, gamma=0.8):
    rng = np.random.default_rng(seed)
    return random_mdp(rng, S, A, gamma), random_policy(rng, S, A), rng


def test_single_state_geometric_series():
    mdp = TabularMdp(np.ones((1, 1, 1)), np.array([[0.5]]), 0.5, np.ones(1))
    q = exact_q(mdp, TabularPolicy(np.ones((1, 1))))
    assert q.values[0, 0] == pytest.approx(1.0, abs=1e-14)


@given(seeds)
def test_zero_discount_q_is_reward(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, 3, 2, 0.0)
    q = exact_q(mdp, random_policy(rng, 3, 2)).values
    np.testing.assert_allclose(q, mdp.mean_reward, atol=1e-14)


def test_exact_q_matches_monte_carlo_rollouts():
    # Independent oracle: truncated discounted rollouts with sampled transitions.
    rng = np.random.default_rng(7)
    mdp = random_mdp(rng, 5, 2, 0.9, reward_scale=0.9, reward_noise=0.1)
    pi = random_policy(rng, 5, 2)
    q = exact_q(mdp, pi).values
    episodes, horizon = 100_000, 160
    s0, a0 = 2, 1
    s = np.full(episodes, s0)
    a = np.full(episodes, a0)
    ret = np.zeros(episodes)
    disc = 1.0
    cdfP = np.cumsum(mdp.transition, axis=2)
    cdfpi = np.cumsum(pi.probs, axis=1)
    for _ in range(horizon):
        ret += disc * mdp.sample_reward(s, a, rng)
        s = np.minimum((rng.random(episodes)[:, None] > cdfP[s, a]).sum(axis=1), 4)
        a = np.minimum((rng.random(episodes)[:, None] > cdfpi[s]).sum(axis=1), 1)
        disc *= mdp.discount
    se = ret.std() / math.sqrt(episodes)
    assert abs(ret.mean() - q[s0, a0]) <= 3 * se + 1e-6


@given(seeds)
def test_exact_q_is_value_iteration_fixed_point(seed):
    mdp, pi, _ = _instance(seed)
    q = np.zeros((4, 3))
    for _ in range(400):
        q = mdp.mean_reward + mdp.discount * mdp.transition @ np.sum(pi.probs * q, axis=1)
    np.testing.assert_allclose(exact_q(mdp, pi).values, q, atol=1e-10)


def test_occupancy_single_state_and_myopic_cases(rng):
    mdp = TabularMdp(np.ones((1, 3, 1)), np.zeros((1, 3)), 0.7, np.ones(1))
    pi = TabularPolicy(np.array([[0.2, 0.3, 0.5]]))
    np.testing.assert_allclose(occupancy(mdp, pi), pi.probs, atol=1e-14)
    mdp0 = random_mdp(rng, 4, 2, 0.0)
    pi0 = random_policy(rng, 4, 2)
    np.testing.assert_allclose(occupancy(mdp0, pi0), mdp0.start_dist[:, None] * pi0.probs, atol=1e-14)


@given(seeds)
def test_occupancy_matches_power_series(seed):
    mdp, pi, _ = _instance(seed, gamma=0.6)
    Pss = np.einsum("sat,sa->st", mdp.transition, pi.probs)
    state = np.zeros(4)
    row = mdp.start_dist.copy()
    for t in range(200):
        state += (1 - mdp.discount) * mdp.discount**t * row
        row = row @ Pss
    np.testing.assert_allclose(occupancy(mdp, pi), state[:, None] * pi.probs, atol=1e-12)


@given(seeds)
def test_reward_along_occupancy_equals_scaled_value(seed):
    mdp, pi, _ = _instance(seed)
    d = occupancy(mdp, pi)
    assert np.sum(d * mdp.mean_reward) == pytest.approx((1 - mdp.discount) * policy_value(mdp, pi), abs=1e-10)


@given(seeds, st.floats(-0.3, 0.3))
def test_bellman_error_fixed_point_and_shift(seed, c):
    mdp, pi, _ = _instance(seed)
    q = exact_q(mdp, pi).values
    np.testing.assert_allclose(bellman_error_table(mdp, pi, q), 0.0, atol=1e-10)
    np.testing.assert_allclose(bellman_error_table(mdp, pi, q + c), (1 - mdp.discount) * c, atol=1e-10)


def test_bellman_error_zero_discount_zero_q(rng):
    mdp = random_mdp(rng, 3, 2, 0.0)
    err = bellman_error_table(mdp, random_policy(rng, 3, 2), np.zeros((3, 2)))
    np.testing.assert_allclose(err, -mdp.mean_reward)


def test_value_from_start_simple_cases(rng):
    pi = random_policy(rng, 3, 2)
    assert value_from_start(np.full((3, 2), 0.4), pi, np.ones(3) / 3) == pytest.approx(0.4)
    q = rng.uniform(-1, 1, (3, 2))
    det = TabularPolicy.deterministic([1, 0, 1], 2)
    assert value_from_start(q, det, np.array([0.0, 1.0, 0.0])) == pytest.approx(q[1, 0])


@given(seeds)
def test_simulation_lemma(seed):
    mdp, pi, rng = _instance(seed)
    q = rng.uniform(-1, 1, (4, 3))
    lhs = value_from_start(q, pi, mdp.start_dist) - policy_value(mdp, pi)
    rhs = np.sum(occupancy(mdp, pi) * bellman_error_table(mdp, pi, q)) / (1 - mdp.discount)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_validation_rejects_bad_inputs():
    P = np.ones((2, 1, 2)) / 2
    with pytest.raises(ValueError):
        TabularMdp(P, np.zeros((2, 1)), 1.0, np.ones(2) / 2)
    with pytest.raises(ValueError):
        TabularMdp(P * 2, np.zeros((2, 1)), 0.5, np.ones(2) / 2)
    with pytest.raises(ValueError):
        TabularMdp(P, np.full((2, 1), 0.9), 0.5, np.ones(2) / 2, reward_noise=0.2)
    with pytest.raises(ValueError):
        TabularPolicy(np.array([[0.5, 0.6]]))


def test_qtable_warns_outside_unit_interval():
    with pytest.warns(UserWarning):
        QTable(np.array([[1.5]]))


def test_rescale_q_maps_into_unit_sup_norm():
    with pytest.warns(UserWarning):
        q = QTable(np.array([[2.0, -1.0]]))
    scaled, factor = rescale_q(q)
    assert np.max(np.abs(scaled.values)) <= 1.0
    np.testing.assert_allclose(scaled.values * factor, q.values)


def test_gridworld_q_fits_unit_ball():
    mdp = gridworld()
    for p in (0.0, 0.3, 0.8, 1.0):
        assert np.linalg.norm(exact_q(mdp, gridworld_policy(p)).values) <= 1.0


def test_bandit_fixture():
    mdp = two_armed_bandit()
    assert mdp.num_states == 1 and mdp.discount == 0.0
    assert policy_value(mdp, TabularPolicy(np.array([[1.0, 0.0]]))) == pytest.approx(0.8)


@given(seed=seeds)
def test_mdp_text_roundtrip(tmp_path_factory, seed):
    mdp, _, _ = _instance(seed)
    path = tmp_path_factory.mktemp("mdp") / "m.mdp"
    save_mdp(mdp, path)
    back = load_mdp(path)
    assert np.array_equal(back.transition, mdp.transition)
    assert np.array_equal(back.mean_reward, mdp.mean_reward)
    assert np.array_equal(back.start_dist, mdp.start_dist)
    assert back.discount == mdp.discount


def test_incomplete_mdp_file_rejected(tmp_path):
    path = tmp_path / "bad.mdp"
    path.write_text("2 1 0.5\n0 0 0.1 1 0\nstart 1 0\n")
    with pytest.raises(ValueError):
        load_mdp(path)
