import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from weakbellman.data import (
    MixtureSpec,
    empirical_histogram,
    load_dataset_csv,
    reference_measure,
    sample_mixture_dataset,
    save_dataset_csv,
    subset,
)
from weakbellman.mdp import TabularPolicy, occupancy, random_mdp, random_policy


def _mix(rng, S=3, A=2, weights=(0.3, 0.7)):
    return MixtureSpec(tuple(random_policy(rng, S, A) for _ in weights), np.array(weights))


def test_empty_dataset(rng):
    mdp = random_mdp(rng, 3, 2, 0.5)
    ds = sample_mixture_dataset(mdp, _mix(rng), 0, seed=1)
    assert len(ds) == 0


@given(st.integers(0, 10_000), st.integers(1, 9000))
def test_sampling_is_deterministic(seed, n):
    rng = np.random.default_rng(5)
    mdp = random_mdp(rng, 3, 2, 0.7, reward_noise=0.0)
    mix = _mix(rng)
    a = sample_mixture_dataset(mdp, mix, n, seed)
    b = sample_mixture_dataset(mdp, mix, n, seed)
    assert a.same_as(b)


def test_identifier_frequencies_match_weights(rng):
    mdp = random_mdp(rng, 3, 2, 0.5)
    ds = sample_mixture_dataset(mdp, _mix(rng), 50_000, seed=3)
    freq = np.bincount(ds.identifiers, minlength=2) / len(ds)
    np.testing.assert_allclose(freq, [0.3, 0.7], atol=0.01)


def test_reference_measure_single_and_duplicate_protocols(rng):
    mdp = random_mdp(rng, 4, 2, 0.6)
    p = random_policy(rng, 4, 2)
    np.testing.assert_allclose(reference_measure(mdp, MixtureSpec.single(p))[..., 0], occupancy(mdp, p))
    mu = reference_measure(mdp, MixtureSpec((p, p), np.array([0.5, 0.5])))
    np.testing.assert_allclose(mu.sum(axis=2), occupancy(mdp, p), atol=1e-15)


def test_histogram_matches_reference_measure(rng):
    # Multinomial oracle: per-cell counts within 3 standard errors, plus a chi-square check.
    mdp = random_mdp(rng, 3, 2, 0.8, reward_noise=0.1)
    mix = _mix(rng)
    n = 100_000
    ds = sample_mixture_dataset(mdp, mix, n, seed=11)
    mu = reference_measure(mdp, mix)
    hist = empirical_histogram(ds, 3, 2, 2)
    se = np.sqrt(mu * (1 - mu) / n)
    assert np.all(np.abs(hist - mu) <= 3 * se + 1e-12)
    mask = mu.ravel() > 0
    p = stats.chisquare(hist.ravel()[mask] * n, mu.ravel()[mask] * n).pvalue
    assert p > 1e-3


def test_next_states_follow_transition_kernel(rng):
    mdp = random_mdp(rng, 3, 2, 0.5)
    ds = sample_mixture_dataset(mdp, MixtureSpec.single(TabularPolicy.uniform(3, 2)), 60_000, seed=2)
    sel = (ds.states == 1) & (ds.actions == 0)
    freq = np.bincount(ds.next_states[sel], minlength=3) / sel.sum()
    se = np.sqrt(mdp.transition[1, 0] * (1 - mdp.transition[1, 0]) / sel.sum())
    assert np.all(np.abs(freq - mdp.transition[1, 0]) <= 4 * se + 1e-12)


def test_rewards_are_noisy_around_means(rng):
    mdp = random_mdp(rng, 2, 2, 0.3, reward_scale=0.5, reward_noise=0.2)
    ds = sample_mixture_dataset(mdp, _mix(rng, 2, 2), 20_000, seed=4)
    dev = ds.rewards - mdp.mean_reward[ds.states, ds.actions]
    assert np.all(np.abs(dev) <= 0.2)
    assert abs(dev.mean()) < 0.01


def test_trajectories_end_at_sampled_pair(rng):
    mdp = random_mdp(rng, 3, 2, 0.8)
    ds = sample_mixture_dataset(mdp, _mix(rng), 500, seed=8, record_trajectories=True)
    for smp in ds:
        assert smp.trajectory[-1] == (smp.state, smp.action)


def test_csv_roundtrip(tmp_path, rng):
    mdp = random_mdp(rng, 3, 2, 0.8, reward_noise=0.1)
    ds = sample_mixture_dataset(mdp, _mix(rng), 300, seed=9, record_trajectories=True)
    save_dataset_csv(ds, tmp_path / "d.csv")
    assert load_dataset_csv(tmp_path / "d.csv", seed=9).same_as(ds)
    part = subset(ds, [0, 5, 7])
    assert len(part) == 3 and part[1].reward == ds[5].reward


def test_mixture_validation():
    p = TabularPolicy.uniform(2, 2)
    with pytest.raises(ValueError):
        MixtureSpec((p, p), np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        MixtureSpec((p,), np.array([0.5, 0.5]))
