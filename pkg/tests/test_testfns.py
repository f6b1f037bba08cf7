import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from weakbellman.data import MixtureSpec, reference_measure, sample_mixture_dataset
from weakbellman.feasibility import RadiusConfig, build_empirical_set, is_member
from weakbellman.features import FeatureMap, tabular_feature_map
from weakbellman.mdp import (
    TabularPolicy,
    bellman_error_table,
    exact_q,
    occupancy,
    random_mdp,
    random_policy,
)
from weakbellman.testfns import (
    Identity,
    Indicator,
    LinearVec,
    TabularTable,
    TestSpace,
    bellman_test_class_tabular,
    eigen_test_class,
    empirical_covariance,
    identity_test,
    importance_sampling_test,
    mixture_indicator_tests,
    parse_test_spec,
    prediction_error_tests,
    single,
    sup_norm,
    union,
)


@pytest.fixture
def mixture_data(rng):
    mdp = random_mdp(rng, 3, 2, 0.6, reward_noise=0.05)
    mix = MixtureSpec((random_policy(rng, 3, 2), random_policy(rng, 3, 2)), np.array([0.4, 0.6]))
    ds = sample_mixture_dataset(mdp, mix, 2000, seed=3, record_trajectories=True)
    return mdp, mix, ds


def test_identity_values_and_norm(mixture_data):
    _, _, ds = mixture_data
    v = identity_test().values(ds)
    assert np.all(v == 1.0)
    g = np.random.default_rng(0).normal(size=len(ds))
    assert np.mean(v * v) == 1.0
    assert np.mean(v * g) == pytest.approx(g.mean())


def test_indicators_partition_data(mixture_data):
    mdp, mix, ds = mixture_data
    tests = mixture_indicator_tests(2)
    total = sum(f.values(ds) for f in tests)
    assert np.all(total == 1.0)
    mu = reference_measure(mdp, mix)
    assert sum(np.sum(mu * f.table(None, 3, 2, 2) ** 2) for f in tests) == pytest.approx(1.0)


def test_indicator_inner_product_is_weighted_component_mean(mixture_data, rng):
    mdp, mix, _ = mixture_data
    mu = reference_measure(mdp, mix)
    g = rng.normal(size=(3, 2))
    for j, (p, a) in enumerate(zip(mix.protocols, mix.weights)):
        lhs = np.sum(mu * Indicator(j).table(None, 3, 2, 2) * g[:, :, None])
        rhs = a * np.sum(occupancy(mdp, p) * g)
        assert lhs == pytest.approx(rhs, abs=1e-14)


def test_eigen_diagonal_order():
    tests = eigen_test_class(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(tests.members[0].vector, [1.0, 0.0])
    np.testing.assert_allclose(tests.members[1].vector, [0.0, 1.0])


@given(arrays(np.float64, (4, 4), elements=st.floats(-1, 1)))
def test_eigen_basis_is_orthonormal(a):
    tests = eigen_test_class(a @ a.T)
    V = np.array([f.vector for f in tests])
    np.testing.assert_allclose(V @ V.T, np.eye(4), atol=1e-9)


def test_eigen_norm_equals_eigenvalue(mixture_data):
    _, _, ds = mixture_data
    fm = FeatureMap(np.random.default_rng(1).uniform(-0.5, 0.5, (3, 2, 3)))
    cov = empirical_covariance(ds, fm)
    vals = np.sort(np.linalg.eigvalsh(cov))[::-1]
    norms = [np.mean(f.values(ds, fm) ** 2) for f in eigen_test_class(cov)]
    np.testing.assert_allclose(norms, vals, atol=1e-10)


def test_eigen_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigen_test_class(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_importance_sampling_collapses_on_policy(mixture_data):
    _, mix, ds = mixture_data
    p = mix.protocols[0]
    f = importance_sampling_test(p, p, 4.0)
    np.testing.assert_allclose(f.values(ds), 0.25)
    assert f.weight(()) == pytest.approx(0.25)


def test_importance_sampling_unbiased_for_target_average():
    # Two-state fixture: b * <f, B(Q)>_mu approximates E_{d^pi}[B(Q)].
    rng = np.random.default_rng(2)
    mdp = random_mdp(rng, 2, 2, 0.5)
    behavior = TabularPolicy.uniform(2, 2)
    target = TabularPolicy(np.array([[0.7, 0.3], [0.4, 0.6]]))
    b = 1.4 ** 30
    ds = sample_mixture_dataset(mdp, MixtureSpec.single(behavior), 200_000, seed=5, record_trajectories=True)
    f = importance_sampling_test(target, behavior, b)
    q = rng.uniform(-1, 1, (2, 2))
    err = bellman_error_table(mdp, target, q)
    est = b * np.mean(f.values(ds) * err[ds.states, ds.actions])
    truth = np.sum(occupancy(mdp, target) * err)
    se = b * np.std(f.values(ds) * err[ds.states, ds.actions]) / np.sqrt(len(ds))
    assert abs(est - truth) <= 4 * se


def test_importance_sampling_errors():
    p = TabularPolicy(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError):
        importance_sampling_test(TabularPolicy.uniform(1, 2), p, 2.0).weight(((0, 1),))


def test_prediction_error_basis_and_sup_norm(rng):
    fm = FeatureMap(rng.uniform(-0.5, 0.5, (3, 2, 2)))
    tests = prediction_error_tests(fm, 2)
    np.testing.assert_array_equal([f.vector for f in tests], np.eye(2))
    assert all(sup_norm(f, fm, 3, 2) <= 1.0 for f in tests)
    w, w2 = rng.normal(size=2), rng.normal(size=2)
    coef = np.linalg.lstsq(np.array([f.vector for f in tests]).T, w - w2, rcond=None)[0]
    np.testing.assert_allclose(np.array([f.vector for f in tests]).T @ coef, w - w2)


def test_bellman_test_class(rng):
    mdp = random_mdp(rng, 3, 2, 0.0, reward_scale=0.5)
    pi = random_policy(rng, 3, 2)
    q_star = exact_q(mdp, pi).values
    tests = bellman_test_class_tabular(mdp, pi, [q_star, np.zeros((3, 2))])
    np.testing.assert_allclose(tests.members[0].array, 0.0, atol=1e-12)
    np.testing.assert_allclose(tests.members[1].array, -mdp.mean_reward)


def test_union_counts_and_set_intersection(mixture_data, rng):
    mdp, mix, ds = mixture_data
    ident = single(identity_test(), "identity")
    assert len(union([ident, ident])) == 1
    assert len(union([ident, mixture_indicator_tests(2)])) == 3
    fm = tabular_feature_map(3, 2)
    pi = random_policy(rng, 3, 2)
    rc = RadiusConfig.parametric(6, len(ds), 0.1)
    parts = [ident, mixture_indicator_tests(2)]
    sets = [build_empirical_set(ds, fm, pi, t, rc, mdp.discount) for t in parts]
    joint = build_empirical_set(ds, fm, pi, union(parts), rc, mdp.discount)
    for _ in range(300):
        w = rng.normal(size=6)
        w *= rng.uniform() / np.linalg.norm(w)
        if is_member(joint, w):
            assert all(is_member(s, w) for s in sets)
        assert is_member(joint, w) == all(is_member(s, w) for s in sets)


def test_table_sup_norm_enforced():
    with pytest.raises(ValueError):
        TabularTable(np.array([[1.5]]))
    with pytest.raises(ValueError):
        LinearVec((1.0, 1.0))


def test_parse_test_spec(rng):
    fm = tabular_feature_map(2, 2)
    assert isinstance(parse_test_spec("identity").members[0], Identity)
    sp = parse_test_spec("union(identity, indicators, pred_error)", fm=fm, num_components=2)
    assert len(sp) == 1 + 2 + 4
    with pytest.raises(ValueError):
        parse_test_spec("eigen")
    with pytest.raises(ValueError):
        parse_test_spec("bogus")
    assert len(parse_test_spec("none")) == 0
    assert isinstance(TestSpace(), TestSpace)
