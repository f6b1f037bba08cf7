"""Empirical and population feasibility sets for linear predictors.

For a test function f the empirical constraint on Q_w = <w, phi> reads

    | <f, delta^pi(Q_w)>_n | / sqrt(||f||_n^2 + lam)  <=  sqrt(rho / n)

where delta^pi is the TD error. Because Q_w is linear this is a slab
| <phi_f - gamma phi+_f, w> - r_f | <= sqrt(rho / n) in weight space, with the
normalized averages computed by :func:`constraint_row`. The population set
replaces sample averages by expectations under the reference measure mu,
TD errors by Bellman errors, and rho by ``inflation * rho`` (default 4).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import AdaptedSample, Dataset, MixtureSpec, reference_measure
from .features import FeatureMap, LinearQ, SoftMaxPolicy, policy_table
from .mdp import TabularMdp, TabularPolicy
from .testfns import TestFunction, TestSpace

POPULATION_INFLATION = 4.0


def policy_probs(policy) -> np.ndarray:
    if isinstance(policy, TabularPolicy):
        return policy.probs
    if isinstance(policy, SoftMaxPolicy):
        return policy_table(policy)
    return np.asarray(policy, dtype=float)


def radius_parametric(d: int, n: int, delta: float, c: float = 1.0) -> float:
    """rho = c * (d log(n/d) + log(n/delta)), valid for n >= 2d."""
    if n < 2 * d:
        raise ValueError(f"parametric radius needs n >= 2d (n={n}, d={d})")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return c * (d * math.log(n / d) + math.log(n / delta))


@dataclass(frozen=True)
class RadiusConfig:
    rho: float
    lam: float
    n: int
    c_universal: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if self.rho < 0 or self.lam < 0:
            raise ValueError("rho and lambda must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be positive")

    @classmethod
    def auto(cls, rho: float, n: int, c_universal: float = 1.0, delta: float | None = None) -> "RadiusConfig":
        """lambda = 4 rho / n."""
        return cls(rho, 4.0 * rho / n, n, c_universal, delta)

    @classmethod
    def parametric(cls, d: int, n: int, delta: float, c_universal: float = 1.0) -> "RadiusConfig":
        return cls.auto(radius_parametric(d, n, delta, c_universal), n, c_universal, delta)

    @property
    def half_width(self) -> float:
        return math.sqrt(self.rho / self.n)

    def population_half_width(self, inflation: float = POPULATION_INFLATION) -> float:
        return math.sqrt(inflation * self.rho / self.n)


@dataclass(frozen=True)
class SlabConstraint:
    """|<direction, w> - offset| <= half_width."""

    direction: tuple
    offset: float
    half_width: float

    def __post_init__(self):
        object.__setattr__(self, "direction", tuple(float(x) for x in np.asarray(self.direction).reshape(-1)))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "half_width", float(self.half_width))
        if self.half_width < 0 or math.isnan(self.half_width):
            raise ValueError("half_width must be >= 0")
        if not (np.all(np.isfinite(self.direction)) and math.isfinite(self.offset)):
            raise ValueError("slab entries must be finite")

    def residual(self, w) -> float:
        return float(np.asarray(self.direction) @ np.asarray(w, dtype=float) - self.offset)

    def violation(self, w) -> float:
        return abs(self.residual(w)) - self.half_width


@dataclass(frozen=True)
class FeasibleSet:
    slabs: tuple = ()
    ball_radius: float = 1.0
    provenance: str = "empirical"
    tags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "slabs", tuple(self.slabs))

    @property
    def num_constraints(self) -> int:
        """Ball plus two affine inequalities per slab."""
        return 2 * len(self.slabs) + 1

    def directions(self) -> np.ndarray:
        return np.array([s.direction for s in self.slabs])

    def to_dict(self) -> dict:
        return {
            "ball_radius": self.ball_radius,
            "provenance": self.provenance,
            "slabs": [
                {"direction": list(s.direction), "offset": s.offset, "half_width": s.half_width}
                for s in self.slabs
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeasibleSet":
        slabs = [SlabConstraint(s["direction"], s["offset"], s["half_width"]) for s in payload["slabs"]]
        return cls(slabs, payload.get("ball_radius", 1.0), payload.get("provenance", "empirical"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FeasibleSet":
        return cls.from_dict(json.loads(text))

    def intersect(self, other: "FeasibleSet") -> "FeasibleSet":
        return FeasibleSet(self.slabs + other.slabs, min(self.ball_radius, other.ball_radius), self.provenance)


def is_member(fs: FeasibleSet, w, tol: float = 1e-9) -> bool:
    w = np.asarray(w, dtype=float)
    if np.linalg.norm(w) > fs.ball_radius + tol:
        return False
    return all(s.violation(w) <= tol for s in fs.slabs)


def td_error(q: LinearQ, fm: FeatureMap, policy, sample: AdaptedSample, discount: float) -> float:
    """Q(s,a) - r - gamma Q(s', pi)."""
    probs = policy_probs(policy)
    w = q.weights
    q_sa = fm(sample.state, sample.action) @ w
    q_next = probs[sample.next_state] @ (fm.values[sample.next_state] @ w)
    return float(q_sa - sample.reward - discount * q_next)


def td_errors(w, fm: FeatureMap, policy, ds: Dataset, discount: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    qtab = fm.q_table(w)
    vnext = np.sum(policy_probs(policy) * qtab, axis=1)
    return qtab[ds.states, ds.actions] - ds.rewards - discount * vnext[ds.next_states]


@dataclass(frozen=True)
class SampleCache:
    """Per-sample quantities shared by every test function and policy."""

    phi: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    n: int

    @classmethod
    def build(cls, ds: Dataset, fm: FeatureMap) -> "SampleCache":
        return cls(fm.values[ds.states, ds.actions], ds.rewards, ds.next_states, len(ds))

    def next_features(self, fm: FeatureMap, policy) -> np.ndarray:
        probs = policy_probs(policy)
        phi_pi = np.einsum("sa,sad->sd", probs, fm.values)
        return phi_pi[self.next_states]


def evaluate_tests(ds: Dataset, fm: FeatureMap, tests) -> np.ndarray:
    """(n, |F|) matrix of test-function values."""
    members = list(tests)
    if not members:
        return np.zeros((len(ds), 0))
    return np.column_stack([f.values(ds, fm) for f in members])


def constraint_row(ds: Dataset, fm: FeatureMap, policy, f: TestFunction, lam: float):
    """Normalized averages (phi_f, r_f, phi+_f, n_eff) for one test function.

    n_eff = sqrt(||f||_n^2 + lam); every average is (1/n) sum f_i x_i / n_eff.
    """
    if len(ds) == 0:
        raise ValueError("empty dataset")
    cache = SampleCache.build(ds, fm)
    fv = f.values(ds, fm)
    return _rows(cache, fm, policy, fv[:, None], lam)[0]


def _rows(cache: SampleCache, fm, policy, F: np.ndarray, lam: float, phi_next=None):
    n = cache.n
    if phi_next is None:
        phi_next = cache.next_features(fm, policy)
    n_eff = np.sqrt(np.sum(F * F, axis=0) / n + lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_bar = (F.T @ cache.phi) / n / n_eff[:, None]
        r_bar = (F.T @ cache.rewards) / n / n_eff
        phi_plus = (F.T @ phi_next) / n / n_eff[:, None]
    return [(phi_bar[k], float(r_bar[k]), phi_plus[k], float(n_eff[k])) for k in range(F.shape[1])]


def build_empirical_set(ds: Dataset, fm: FeatureMap, policy, tests: TestSpace, rc: RadiusConfig,
                        discount: float, cache: SampleCache | None = None,
                        F: np.ndarray | None = None) -> FeasibleSet:
    """One slab per test function, half-width sqrt(rho / n), plus the unit ball.

    ``cache`` and ``F`` (the test matrix) may be passed in to avoid recomputing
    policy-independent quantities across calls.
    """
    if len(ds) == 0:
        raise ValueError("empty dataset")
    members = list(tests)
    if not members:
        return FeasibleSet((), 1.0, "empirical")
    cache = cache or SampleCache.build(ds, fm)
    F = evaluate_tests(ds, fm, members) if F is None else F
    tau = rc.half_width
    slabs, tags = [], []
    for k, (phi_bar, r_bar, phi_plus, n_eff) in enumerate(_rows(cache, fm, policy, F, rc.lam)):
        if n_eff == 0.0:
            warnings.warn("dropping test function with zero empirical norm (lambda = 0)", stacklevel=2)
            continue
        slabs.append(SlabConstraint(phi_bar - discount * phi_plus, r_bar, tau))
        tags.append(tests.tags[k] if k < len(tests.tags) else "")
    return FeasibleSet(slabs, 1.0, "empirical", tuple(tags))


def population_row(mdp: TabularMdp, mu: np.ndarray, fm: FeatureMap, policy, f: TestFunction, lam: float):
    """(g, offset, norm) with <f, B^pi(Q_w)>_mu = <g, w> - offset and norm = sqrt(||f||_mu^2 + lam)."""
    S, A, m = mu.shape
    T = f.table(fm, S, A, m)
    weight = np.sum(mu * T, axis=2)  # (S, A)
    probs = policy_probs(policy)
    phi_pi = np.einsum("sa,sad->sd", probs, fm.values)
    phi_plus = np.einsum("sat,td->sad", mdp.transition, phi_pi)
    g = np.einsum("sa,sad->d", weight, fm.values - mdp.discount * phi_plus)
    offset = float(np.sum(weight * mdp.mean_reward))
    norm = math.sqrt(float(np.sum(mu * T * T)) + lam)
    return g, offset, norm


def build_population_set(mdp: TabularMdp, mix: MixtureSpec | np.ndarray, fm: FeatureMap, policy,
                         tests: TestSpace, rc: RadiusConfig,
                         inflation: float = POPULATION_INFLATION) -> FeasibleSet:
    """Population counterpart: exact Bellman errors under mu, half-width sqrt(inflation rho / n)."""
    mu = reference_measure(mdp, mix) if isinstance(mix, MixtureSpec) else np.asarray(mix, dtype=float)
    if mu.ndim == 2:
        mu = mu[:, :, None]
    tau = rc.population_half_width(inflation)
    slabs, tags = [], []
    for k, f in enumerate(tests):
        g, off, norm = population_row(mdp, mu, fm, policy, f, rc.lam)
        if norm == 0.0:
            warnings.warn("dropping test function with zero population norm (lambda = 0)", stacklevel=2)
            continue
        slabs.append(SlabConstraint(g / norm, off / norm, tau))
        tags.append(tests.tags[k] if k < len(tests.tags) else "")
    return FeasibleSet(slabs, 1.0, "population", tuple(tags))


def bellman_error_affine(mdp: TabularMdp, fm: FeatureMap, policy, weights: np.ndarray):
    """E_weights[B^pi(Q_w)] = <g, w> - c for a nonnegative (S, A) weighting."""
    probs = policy_probs(policy)
    phi_pi = np.einsum("sa,sad->sd", probs, fm.values)
    phi_plus = np.einsum("sat,td->sad", mdp.transition, phi_pi)
    g = np.einsum("sa,sad->d", weights, fm.values - mdp.discount * phi_plus)
    return g, float(np.sum(weights * mdp.mean_reward))
