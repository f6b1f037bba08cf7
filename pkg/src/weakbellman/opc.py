"""Off-policy cost (OPC) coefficients: exact tabular values and upper bounds.

The exact coefficient maximizes the squared average Bellman error along the
target occupancy over the population feasible set, normalized by
(1 + lam) * rho_eff / n where rho_eff is the radius used for that set.
Every closed-form bound below is computed from exact tabular expectations.

Ratio-type bounds are nonconvex maximizations. They are approximated by
multi-start Frank-Wolfe ascent (each linear step is a conic solve over the
feasible set), always including the maximizer of the exact coefficient as a
start. The reported numbers are therefore lower estimates of the true
supremum that still dominate the exact coefficient.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .conic import AffineObjective, solve, solve_or_raise
from .data import MixtureSpec, reference_measure
from .feasibility import (
    FeasibleSet,
    RadiusConfig,
    bellman_error_affine,
    build_population_set,
    policy_probs,
)
from .features import FeatureMap
from .mdp import TabularMdp, TabularPolicy, occupancy
from .testfns import TabularTable, TestSpace

OPC_INFLATION = 1.0
EIG_FLOOR = 1e-12


@dataclass
class OpcReport:
    exact: float | None
    bounds: dict = field(default_factory=dict)
    rc: RadiusConfig | None = None
    test_space_tag: str = ""

    def to_dict(self) -> dict:
        rc = None if self.rc is None else {"rho": self.rc.rho, "lambda": self.rc.lam, "n": self.rc.n}
        return {"exact": self.exact, "bounds": dict(self.bounds), "rc": rc, "tests": self.test_space_tag}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def rows(self) -> list[tuple[str, float]]:
        out = [("exact", self.exact)] if self.exact is not None else []
        return out + sorted(self.bounds.items())


@dataclass
class OpcExact:
    value: float
    argmax: np.ndarray
    numerator: float  # max over the set of (E_pi B)^2
    population_set: FeasibleSet


def _occ_policy(mdp, policy):
    probs = policy_probs(policy)
    return occupancy(mdp, TabularPolicy(probs / probs.sum(axis=1, keepdims=True)))


def _extremes(fs: FeasibleSet, g: np.ndarray, c: float):
    """min and max of <g, w> - c over fs."""
    lo = solve_or_raise(fs, AffineObjective(g, -c, "min"))
    hi = solve_or_raise(fs, AffineObjective(g, -c, "max"))
    return lo, hi


def opc_exact_details(mdp: TabularMdp, mix: MixtureSpec, fm: FeatureMap, policy, tests: TestSpace,
                      rc: RadiusConfig, inflation: float = OPC_INFLATION) -> OpcExact:
    fs = build_population_set(mdp, mix, fm, policy, tests, rc, inflation)
    g, c = bellman_error_affine(mdp, fm, policy, _occ_policy(mdp, policy))
    lo, hi = _extremes(fs, g, c)
    best = lo if lo.value ** 2 >= hi.value ** 2 else hi
    num = best.value ** 2
    return OpcExact(num / ((1.0 + rc.lam) * inflation * rc.rho / rc.n), best.point, num, fs)


def opc_exact_tabular(mdp: TabularMdp, mix: MixtureSpec, fm: FeatureMap, policy, tests: TestSpace,
                      rc: RadiusConfig, inflation: float = OPC_INFLATION) -> float:
    """max over the population set of (E_{d^pi} B^pi(Q_w))^2 / ((1 + lam) rho_eff / n).

    The average Bellman error is affine in w, so two conic solves suffice.
    ``inflation`` multiplies rho in the population set (and in the
    normalizer); 1 is the rescaled convention under which on-policy data with
    the identity test gives a coefficient of at most 1.
    """
    return opc_exact_details(mdp, mix, fm, policy, tests, rc, inflation).value


# -- ratio maximization ----------------------------------------------------------


def _sq(w, terms):
    return sum(beta * (h @ w - e) ** 2 for beta, h, e in terms)


def _dsq(w, terms):
    return sum(2 * beta * (h @ w - e) * h for beta, h, e in terms)


def _terms(x):
    """Accept a single affine pair (g, c) or a list of weighted (beta, h, e) terms."""
    if isinstance(x, tuple) and len(x) == 2:
        return [(1.0, x[0], x[1])]
    return list(x)


def _ratio(w, num, dens):
    top, bot = _sq(w, _terms(num)), _sq(w, dens)
    if bot <= 0:
        return math.inf if top > 0 else 0.0
    return top / bot


def _ratio_grad(w, num, dens):
    num = _terms(num)
    # gradient of the log ratio
    return _dsq(w, num) / _sq(w, num) - _dsq(w, dens) / _sq(w, dens)


def maximize_ratio(fs: FeasibleSet, num, dens, starts, iters: int = 8) -> tuple[float, np.ndarray]:
    """Frank-Wolfe ascent of a ratio of weighted sums of squared affine forms over a convex set."""
    best_val, best_w = -math.inf, None
    for w in starts:
        w = np.asarray(w, dtype=float)
        val = _ratio(w, num, dens)
        for _ in range(iters):
            if not math.isfinite(val) or val == 0.0:
                break
            grad = _ratio_grad(w, num, dens)
            sol = solve(fs, AffineObjective(grad, 0.0, "max"))
            if sol.point is None:
                break
            direction = sol.point - w
            if grad @ direction <= 1e-12:
                break
            steps = np.linspace(0.0, 1.0, 21)[1:]
            vals = [_ratio(w + s * direction, num, dens) for s in steps]
            k = int(np.argmax(vals))
            if vals[k] <= val * (1 + 1e-10):
                break
            w, val = w + steps[k] * direction, vals[k]
        if val > best_val:
            best_val, best_w = val, w
    return best_val, best_w


def _random_starts(fs: FeasibleSet, d: int, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    pts = []
    for _ in range(count):
        sol = solve(fs, AffineObjective(rng.normal(size=d), 0.0, "max"))
        if sol.point is not None:
            pts.append(sol.point)
    if len(pts) >= 2:
        center = np.mean(pts, axis=0)
        pts = [center + rng.uniform(0.2, 1.0) * (p - center) for p in pts]
    return pts


# -- bounds ----------------------------------------------------------------------


def opc_bound_identity(mdp, mix, fm, policy, tests, rc, inflation: float = OPC_INFLATION) -> float:
    """max (E_pi B)^2 / max (E_mu B)^2 over the population set; needs 1 in the tests."""
    ex = opc_exact_details(mdp, mix, fm, policy, tests, rc, inflation)
    mu_sa = reference_measure(mdp, mix).sum(axis=2)
    g, c = bellman_error_affine(mdp, fm, policy, mu_sa)
    lo, hi = _extremes(ex.population_set, g, c)
    den = max(lo.value ** 2, hi.value ** 2)
    return math.inf if den == 0 else ex.numerator / den


def opc_bound_mixture(mdp: TabularMdp, mix: MixtureSpec, fm: FeatureMap, policy, rc: RadiusConfig,
                      sample_budget: int = 64, tests: TestSpace | None = None,
                      inflation: float = OPC_INFLATION, seed: int = 0) -> float:
    """(1 + m lam)/(1 + lam) * max_w (E_pi B)^2 / sum_j alpha_j^2 (E_{rho_j} B)^2.

    The maximum runs over the population set for ``tests`` (default: the
    mixture indicators). Returned value is the best ratio found.
    """
    from .testfns import mixture_indicator_tests

    m = mix.num_components
    tests = mixture_indicator_tests(m) if tests is None else tests
    ex = opc_exact_details(mdp, mix, fm, policy, tests, rc, inflation)
    num = bellman_error_affine(mdp, fm, policy, _occ_policy(mdp, policy))
    dens = []
    for p, a in zip(mix.protocols, mix.weights):
        h, e = bellman_error_affine(mdp, fm, policy, occupancy(mdp, p))
        dens.append((a * a, h, e))
    rng = np.random.default_rng(seed)
    starts = [ex.argmax] + _random_starts(ex.population_set, fm.dim, max(sample_budget - 1, 0), rng)
    ratio, _ = maximize_ratio(ex.population_set, num, dens, starts)
    return float((1 + m * rc.lam) / (1 + rc.lam) * ratio)


def opc_bound_mixture_form_i(mdp, mix, fm, policy, rc, tests=None, inflation: float = OPC_INFLATION,
                             sample_budget: int = 16, seed: int = 0) -> float:
    """Form (i): exact numerator over a lower estimate of the denominator's max.

    Under-estimating the denominator only raises the bound, so the result is
    a valid upper bound on the exact coefficient.
    """
    from .testfns import mixture_indicator_tests

    m = mix.num_components
    tests = mixture_indicator_tests(m) if tests is None else tests
    ex = opc_exact_details(mdp, mix, fm, policy, tests, rc, inflation)
    quads = []
    for p, a in zip(mix.protocols, mix.weights):
        h, e = bellman_error_affine(mdp, fm, policy, occupancy(mdp, p))
        quads.append((a * a, h, e))
    rng = np.random.default_rng(seed)
    cands = [ex.argmax] + _random_starts(ex.population_set, fm.dim, sample_budget, rng)
    for beta, h, e in quads:
        for sense in ("min", "max"):
            sol = solve(ex.population_set, AffineObjective(h, -e, sense))
            if sol.point is not None:
                cands.append(sol.point)
    den = max(sum(b * (h @ w - e) ** 2 for b, h, e in quads) for w in cands)
    if den == 0:
        return math.inf
    return (1 + m * rc.lam) / (1 + rc.lam) * ex.numerator / den


def opc_identity_star(mdp, mix, fm, policy, tests, rc, inflation: float = OPC_INFLATION,
                      sample_budget: int = 16, seed: int = 0) -> float:
    """max over the set of (E_pi B)^2 / (E_mu B)^2 (ratio form of the identity bound)."""
    ex = opc_exact_details(mdp, mix, fm, policy, tests, rc, inflation)
    num = bellman_error_affine(mdp, fm, policy, _occ_policy(mdp, policy))
    h, e = bellman_error_affine(mdp, fm, policy, reference_measure(mdp, mix).sum(axis=2))
    rng = np.random.default_rng(seed)
    starts = [ex.argmax] + _random_starts(ex.population_set, fm.dim, max(sample_budget - 1, 0), rng)
    return maximize_ratio(ex.population_set, num, [(1.0, h, e)], starts)[0]


def bellman_rank_embedding(mdp: TabularMdp, fm: FeatureMap, policy, dist: np.ndarray) -> np.ndarray:
    """nu with E_dist[B^pi(Q_w)] - E_dist[B^pi(Q_w0)] = <nu, w - w0> for linear Q."""
    return bellman_error_affine(mdp, fm, policy, dist)[0]


def opc_bound_bellman_rank(policy_embed, data_embeds, weights, lam: float, m: int | None = None,
                           regularization: float = 0.0) -> float:
    """(1 + m lam)/(1 + lam) * nu_pi^T Lambda^{-1} nu_pi, Lambda = sum alpha_j^2 nu_j nu_j^T.

    When Lambda is singular but nu_pi lies in its range, the pseudo-inverse
    gives the same Cauchy-Schwarz bound on that range. If nu_pi has a
    component outside the range the coefficient is unbounded: a warning is
    issued and inf returned. ``regularization`` adds a multiple of the identity.
    """
    nu = np.asarray(policy_embed, dtype=float)
    V = np.atleast_2d(np.asarray(data_embeds, dtype=float))
    a = np.asarray(weights, dtype=float)
    m = len(a) if m is None else m
    Lam = (V.T * a ** 2) @ V + regularization * np.eye(len(nu))
    evals, evecs = np.linalg.eigh(Lam)
    cutoff = 1e-10 * max(evals.max(), 1e-300)
    keep = evals > cutoff
    coords = evecs.T @ nu
    if np.linalg.norm(coords[~keep]) > 1e-8 * max(np.linalg.norm(nu), 1e-300):
        warnings.warn(f"Bellman-rank covariance is singular (min eigenvalue {evals.min():.3g}) "
                      "and the policy embedding leaves its range", stacklevel=2)
        return math.inf
    return float((1 + m * lam) / (1 + lam) * np.sum(coords[keep] ** 2 / evals[keep]))


def likelihood_ratio(mdp: TabularMdp, mix: MixtureSpec, policy) -> np.ndarray:
    d = _occ_policy(mdp, policy)
    mu = reference_measure(mdp, mix).sum(axis=2)
    if np.any((mu <= 0) & (d > 0)):
        raise ValueError("likelihood ratio unbounded: mu(s,a) = 0 where d^pi(s,a) > 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mu > 0, d / mu, 0.0)


def likelihood_ratio_test(mdp: TabularMdp, mix: MixtureSpec, policy, scaling_b: float | None = None) -> TabularTable:
    """f*(s, a) = ratio(s, a) / b; b defaults to the max ratio."""
    ratio = likelihood_ratio(mdp, mix, policy)
    b = float(ratio.max()) if scaling_b is None else scaling_b
    return TabularTable(ratio / b)


def opc_bound_likelihood(mdp: TabularMdp, mix: MixtureSpec, policy, scaling_b: float, lam: float) -> tuple[float, float]:
    """Bounds (i) (E_pi[d/mu] + b^2 lam)/(1 + lam) and (ii) b (1 + b lam)/(1 + lam)."""
    ratio = likelihood_ratio(mdp, mix, policy)
    if ratio.max() > scaling_b * (1 + 1e-12):
        raise ValueError(f"scaling b={scaling_b} below the max likelihood ratio {ratio.max():.4g}")
    d = _occ_policy(mdp, policy)
    chi = float(np.sum(d * ratio))
    return (chi + scaling_b ** 2 * lam) / (1 + lam), scaling_b * (1 + scaling_b * lam) / (1 + lam)


def _tabular_moments(mdp: TabularMdp, mix, fm: FeatureMap, policy):
    mu = reference_measure(mdp, mix).sum(axis=2) if isinstance(mix, MixtureSpec) else np.asarray(mix)
    probs = policy_probs(policy)
    phi_pi = np.einsum("sa,sad->sd", probs, fm.values)
    phi_plus = np.einsum("sat,td->sad", mdp.transition, phi_pi)
    return mu, phi_plus


def population_covariances(mdp: TabularMdp, mix, fm: FeatureMap, policy):
    """(Sigma, Sigma_b) = (E_mu[phi phi^T], E_mu[phi phi+^T])."""
    mu, phi_plus = _tabular_moments(mdp, mix, fm, policy)
    sigma = np.einsum("sa,sad,sae->de", mu, fm.values, fm.values)
    sigma_b = np.einsum("sa,sad,sae->de", mu, fm.values, phi_plus)
    return sigma, sigma_b


def policy_mean_features(mdp: TabularMdp, fm: FeatureMap, policy, bootstrap: bool = False) -> np.ndarray:
    """E_{d^pi}[phi] or, with ``bootstrap``, E_{d^pi}[phi - gamma phi+]."""
    d = _occ_policy(mdp, policy)
    if not bootstrap:
        return np.einsum("sa,sad->d", d, fm.values)
    return bellman_error_affine(mdp, fm, policy, d)[0]


def opc_bound_closure_linear(cov, policy_mean_feature, lam: float, d: int | None = None, c: float = 1.0) -> float:
    """c d ||E_pi phi||^2 in the (Sigma + lam I)^{-1} norm."""
    cov = np.asarray(cov, dtype=float)
    x = np.asarray(policy_mean_feature, dtype=float)
    d = cov.shape[0] if d is None else d
    return c * d * float(x @ np.linalg.solve(cov + lam * np.eye(cov.shape[0]), x))


def _sym_sqrt(M):
    vals, vecs = np.linalg.eigh((M + M.T) / 2)
    vals = np.maximum(vals, EIG_FLOOR)
    return (vecs * np.sqrt(vals)) @ vecs.T, (vecs / np.sqrt(vals)) @ vecs.T


def bootstrap_matrix(cov, cross_cov, lam: float, discount: float) -> np.ndarray:
    """(S^{1/2} - gamma S^{-1/2} Sigma_b)^T (S^{1/2} - gamma S^{-1/2} Sigma_b), S = Sigma + lam I."""
    cov = np.asarray(cov, dtype=float)
    root, inv_root = _sym_sqrt(cov + lam * np.eye(cov.shape[0]))
    B = root - discount * inv_root @ np.asarray(cross_cov, dtype=float)
    return B.T @ B


def opc_bound_bootstrap_linear(cov, cross_cov, policy_mean, lam: float, discount: float,
                               d: int | None = None, c: float = 1.0) -> float:
    """c d ||E_pi[phi - gamma phi+]||^2 in the inverse bootstrap-covariance norm."""
    cov = np.asarray(cov, dtype=float)
    if np.linalg.eigvalsh(cov + lam * np.eye(cov.shape[0])).min() <= EIG_FLOOR:
        raise np.linalg.LinAlgError("Sigma + lam I is not positive definite")
    M = bootstrap_matrix(cov, cross_cov, lam, discount)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.min() <= 1e-12 * max(sv.max(), 1e-300):
        raise np.linalg.LinAlgError(f"bootstrap covariance singular (smallest singular value {sv.min():.3g})")
    x = np.asarray(policy_mean, dtype=float)
    d = M.shape[0] if d is None else d
    return c * d * float(x @ np.linalg.solve(M, x))


def pred_error_ratio(v, sigma_mu, cross_mu, a_pi, lam: float) -> float:
    """Prediction-error ratio at epsilon = <phi, v>.

    sigma_mu = E_mu[phi phi^T], cross_mu = E_mu[phi (phi - gamma phi+)^T],
    a_pi = E_pi[phi - gamma phi+]; ||1||_pi = 1.
    """
    v = np.asarray(v, dtype=float)
    den = float(v @ cross_mu @ v) ** 2
    top = float(a_pi @ v) ** 2
    if den == 0.0:
        return math.inf if top > 0 else 0.0
    return (float(v @ sigma_mu @ v) + lam) / (1 + lam) * top / den


def opc_bound_pred_error(mdp: TabularMdp, mix, fm: FeatureMap, policy, lam: float,
                         multistart_budget: int = 64, radius: float = 2.0, seed: int = 0) -> tuple[float, np.ndarray]:
    """Multi-start ascent of the prediction-error ratio over epsilon = <phi, v>.

    Directions v range over the sphere of the given radius (2 is the largest
    difference of two unit-ball predictors). For lam = 0 the ratio is
    scale-invariant, so this is the maximum over the whole difference class;
    for lam > 0 the ratio decreases with ||v||, and the value is that of the
    outer shell. Returns (best value found, best v).
    """
    sigma, sigma_b = population_covariances(mdp, mix, fm, policy)
    cross = sigma - mdp.discount * sigma_b
    cross = (cross + cross.T) / 2
    a_pi = policy_mean_features(mdp, fm, policy, bootstrap=True)
    rng = np.random.default_rng(seed)

    def neg(u):
        nrm = np.linalg.norm(u)
        if nrm == 0:
            return 0.0
        r = pred_error_ratio(radius * u / nrm, sigma, cross, a_pi, lam)
        return -min(r, 1e300)

    best, best_v = -math.inf, None
    starts = [a_pi] + [rng.normal(size=fm.dim) for _ in range(max(multistart_budget - 1, 0))]
    for u0 in starts:
        if np.linalg.norm(u0) == 0:
            continue
        if not math.isfinite(-neg(u0)):
            continue  # vanishing denominator: restart from the next point
        res = minimize(neg, u0, method="Nelder-Mead" if fm.dim == 1 else "BFGS")
        val = -res.fun
        if val > best:
            best, best_v = val, radius * res.x / np.linalg.norm(res.x)
    return best, best_v


def bellman_norm_terms(mdp: TabularMdp, fm: FeatureMap, policy, weights: np.ndarray) -> list:
    """Terms (weight, g, c) with ||B^pi(Q_w)||^2_weights = sum weight * (<g, w> - c)^2."""
    probs = policy_probs(policy)
    phi_pi = np.einsum("sa,sad->sd", probs, fm.values)
    phi_plus = np.einsum("sat,td->sad", mdp.transition, phi_pi)
    G = fm.values - mdp.discount * phi_plus
    S, A = weights.shape
    return [(float(weights[s, a]), G[s, a], float(mdp.mean_reward[s, a]))
            for s in range(S) for a in range(A) if weights[s, a] > 0]


def opc_bound_bellman_norm_ratio(mdp, mix, fm, policy, tests, rc, c1: float = 1.0,
                                 inflation: float = OPC_INFLATION, sample_budget: int = 16, seed: int = 0) -> float:
    """c1 * max over the population set of ||B Q||^2_pi / ||B Q||^2_mu (weak realizability fallback)."""
    ex = opc_exact_details(mdp, mix, fm, policy, tests, rc, inflation)
    num = bellman_norm_terms(mdp, fm, policy, _occ_policy(mdp, policy))
    den = bellman_norm_terms(mdp, fm, policy, reference_measure(mdp, mix).sum(axis=2))
    rng = np.random.default_rng(seed)
    starts = [ex.argmax] + _random_starts(ex.population_set, fm.dim, max(sample_budget - 1, 0), rng)
    return c1 * maximize_ratio(ex.population_set, num, den, starts)[0]


def opc_bound_importance_sampling(scaling_b: float, lam: float) -> float:
    """sqrt(b (1 + lam b) / (1 + lam)), the coefficient attached to a single IS test function."""
    return math.sqrt(scaling_b * (1 + lam * scaling_b) / (1 + lam))


def is_closure_union_report(mdp, mix, fm, policy, rc, scaling_b: float, c1: float = 1.0,
                            multistart_budget: int = 16, inflation: float = OPC_INFLATION) -> dict:
    """The three coefficients for an IS test joined with prediction-error tests, and their minimum.

    ``importance_sampling`` comes from the single IS test, ``pred_error``
    assumes weak Bellman closure and ``bellman_norm`` only weak
    realizability; ``union`` is their minimum.
    """
    from .testfns import prediction_error_tests

    parts = {
        "importance_sampling": opc_bound_importance_sampling(scaling_b, rc.lam),
        "pred_error": opc_bound_pred_error(mdp, mix, fm, policy, rc.lam, multistart_budget)[0],
        "bellman_norm": opc_bound_bellman_norm_ratio(mdp, mix, fm, policy, prediction_error_tests(fm), rc, c1,
                                                     inflation, multistart_budget),
    }
    parts["union"] = opc_union_report(list(parts.items()))
    return parts


def opc_union_report(components) -> float:
    """The union of test classes inherits the smallest coefficient."""
    vals = [float(v) for _, v in components]
    if not vals:
        raise ValueError("no components")
    return min(vals)


def bellman_residual_norm(mdp: TabularMdp, mu_sa: np.ndarray, fm: FeatureMap, policy, w) -> float:
    """||B^pi(Q_w)||_mu for a state-action weighting mu_sa."""
    probs = policy_probs(policy)
    q = fm.q_table(w)
    err = q - mdp.mean_reward - mdp.discount * (mdp.transition @ np.sum(probs * q, axis=1))
    return float(np.sqrt(np.sum(mu_sa * err * err)))


def opc_report(mdp: TabularMdp, mix: MixtureSpec, fm: FeatureMap, policy, tests: TestSpace, rc: RadiusConfig,
               tag: str = "", sample_budget: int = 16, c: float = 1.0,
               inflation: float = OPC_INFLATION, scaling_b: float | None = None) -> OpcReport:
    """Exact coefficient plus every bound whose test-class hypothesis is met by ``tests``."""
    from .testfns import Identity, Indicator

    members = set(tests.members)
    rep = OpcReport(opc_exact_tabular(mdp, mix, fm, policy, tests, rc, inflation), {}, rc, tag)
    if Identity() in members:
        rep.bounds["identity"] = opc_bound_identity(mdp, mix, fm, policy, tests, rc, inflation)
    m = mix.num_components
    if all(Indicator(j) in members for j in range(m)):
        rep.bounds["mixture"] = opc_bound_mixture(mdp, mix, fm, policy, rc, sample_budget, tests, inflation)
    try:
        star = likelihood_ratio_test(mdp, mix, policy, scaling_b)
        if star in members:
            b = scaling_b if scaling_b is not None else float(likelihood_ratio(mdp, mix, policy).max())
            rep.bounds["likelihood"] = opc_bound_likelihood(mdp, mix, policy, b, rc.lam)[0]
    except ValueError:
        pass
    sigma, sigma_b = population_covariances(mdp, mix, fm, policy)
    rep.bounds["closure_linear"] = opc_bound_closure_linear(
        sigma, policy_mean_features(mdp, fm, policy), rc.lam, fm.dim, c)
    try:
        rep.bounds["bootstrap_linear"] = opc_bound_bootstrap_linear(
            sigma, sigma_b, policy_mean_features(mdp, fm, policy, bootstrap=True), rc.lam,
            mdp.discount, fm.dim, c)
    except np.linalg.LinAlgError:
        rep.bounds["bootstrap_linear"] = math.inf
    return rep
