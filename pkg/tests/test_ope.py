import numpy as np
import pytest

from fixtures import random_slab_instance
from weakbellman.conic import brute_force_solve, AffineObjective
from weakbellman.data import MixtureSpec, sample_mixture_dataset
from weakbellman.feasibility import RadiusConfig, build_empirical_set
from weakbellman.features import FeatureMap, tabular_feature_map
from weakbellman.mdp import (
    TabularPolicy,
    gridworld,
    gridworld_policy,
    policy_value,
    random_mdp,
    random_policy,
    value_from_start,
)
from weakbellman.ope import (
    confidence_interval,
    interval_over,
    loglog_slope,
    on_policy_width_bound,
    start_objective,
)
from weakbellman.testfns import TestSpace, identity_test, single


def test_start_objective_point_mass_and_one_hot(rng):
    fm = FeatureMap(rng.uniform(-0.5, 0.5, (3, 2, 2)))
    det = TabularPolicy.deterministic([0, 1, 1], 2)
    np.testing.assert_allclose(start_objective(fm, det, np.array([0.0, 1.0, 0.0])), fm(1, 1))
    pi = random_policy(rng, 3, 2)
    nu = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(start_objective(tabular_feature_map(3, 2), pi, nu), (nu[:, None] * pi.probs).ravel())


def test_start_objective_matches_direct_value(rng):
    fm = FeatureMap(rng.uniform(-0.5, 0.5, (3, 2, 4)))
    pi = random_policy(rng, 3, 2)
    nu = rng.dirichlet(np.ones(3))
    for _ in range(20):
        w = rng.normal(size=4)
        w /= np.linalg.norm(w)
        b = start_objective(fm, pi, nu)
        assert b @ w == pytest.approx(value_from_start(fm.q_table(w), pi, nu), abs=1e-12)


def _gridworld_ci(n, seed, tests=None, rc=None):
    mdp, pi = gridworld(), gridworld_policy()
    fm = tabular_feature_map(5, 2)
    ds = sample_mixture_dataset(mdp, MixtureSpec.single(pi), n, seed)
    rc = rc or RadiusConfig.parametric(fm.dim, n, 0.1)
    tests = single(identity_test()) if tests is None else tests
    return confidence_interval(ds, fm, pi, tests, rc, mdp.start_dist, mdp.discount), mdp, pi


def test_empty_tests_give_ball_extremes():
    ci, mdp, pi = _gridworld_ci(200, 0, tests=TestSpace())
    b = start_objective(tabular_feature_map(5, 2), pi, mdp.start_dist)
    assert ci.v_min == pytest.approx(-np.linalg.norm(b), abs=1e-7)
    assert ci.v_max == pytest.approx(np.linalg.norm(b), abs=1e-7)
    huge, _, _ = _gridworld_ci(200, 0, rc=RadiusConfig(1e12, 0.0, 200))
    assert huge.v_min == pytest.approx(ci.v_min, abs=1e-6)


def test_interval_matches_brute_force_d2(rng):
    fs, _ = random_slab_instance(rng, 2)
    b = rng.normal(size=2)
    lo, hi = interval_over(fs, b)
    assert lo.value == pytest.approx(brute_force_solve(fs, AffineObjective(b, 0.0, "min")), abs=5e-3)
    assert hi.value == pytest.approx(brute_force_solve(fs, AffineObjective(b, 0.0, "max")), abs=5e-3)


def test_on_policy_interval_covers_and_obeys_width_bound():
    # The empirical set sits inside the population set built with 4 rho, so the
    # population width bound applies with rho replaced by 4 rho.
    for seed in range(10):
        ci, mdp, pi = _gridworld_ci(2000, seed)
        assert ci.contains(policy_value(mdp, pi))
        assert ci.width <= 2.0 * on_policy_width_bound(ci.rc, mdp.discount) + 1e-9
        assert ci.status_min == ci.status_max == "optimal"


def test_interval_shrinks_with_n():
    widths = [np.mean([_gridworld_ci(n, s)[0].width for s in range(5)]) for n in (500, 8000)]
    assert widths[1] < widths[0]


def test_record_and_slope_helpers():
    ci, mdp, pi = _gridworld_ci(500, 1)
    rec = ci.record("pi", 0.1)
    assert set(rec) == {"policy_id", "n", "rho", "lambda", "v_min", "v_max", "v_true"}
    assert loglog_slope([1, 10, 100], [1.0, 0.1, 0.01]) == pytest.approx(-1.0)


def test_off_policy_interval_from_random_behavior(rng):
    mdp = random_mdp(rng, 3, 2, 0.5, reward_scale=0.2)
    target = random_policy(rng, 3, 2)
    fm = tabular_feature_map(3, 2)
    ds = sample_mixture_dataset(mdp, MixtureSpec.single(random_policy(rng, 3, 2)), 5000, 2)
    rc = RadiusConfig.parametric(6, 5000, 0.1)
    fs = build_empirical_set(ds, fm, target, single(identity_test()), rc, mdp.discount)
    lo, hi = interval_over(fs, start_objective(fm, target, mdp.start_dist))
    assert lo.value <= hi.value
