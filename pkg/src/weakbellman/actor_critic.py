"""Max-min policy optimization: soft-max actor driven by a pessimistic critic.

Each round evaluates the current soft-max policy with the lower end of the
empirical confidence interval, then moves the actor parameter along the
critic's weight vector (theta <- theta + eta * w). With the standard
stepsize eta = sqrt(log|A| / (2T)) this is exponentiated-gradient ascent on
the critic's action values in every state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .conic import AffineObjective, solve_or_raise
from .data import Dataset
from .feasibility import RadiusConfig, SampleCache, build_empirical_set, evaluate_tests
from .features import FeatureMap, SoftMaxPolicy, policy_table, to_tabular
from .mdp import TabularMdp, TabularPolicy, bellman_error_table, exact_q, policy_value
from .ope import start_objective
from .testfns import TestSpace


def auto_stepsize(num_actions: int, T: int) -> float:
    return math.sqrt(math.log(num_actions) / (2 * T))


def mirror_step(theta, w, eta: float) -> np.ndarray:
    theta, w = np.asarray(theta, dtype=float), np.asarray(w, dtype=float)
    if theta.shape != w.shape:
        raise ValueError("theta and w differ in dimension")
    return theta + eta * w


def exponentiated_update_reference(probs, q_row, eta: float) -> np.ndarray:
    """pi'(a) proportional to pi(a) exp(eta q(a)), computed in log space."""
    logits = np.log(np.asarray(probs, dtype=float)) + eta * np.asarray(q_row, dtype=float)
    return np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))


@dataclass
class ActorState:
    theta: np.ndarray
    t: int
    eta: float
    history: list = field(default_factory=list)  # (theta_t, w_t, v_min_t)

    def policies(self, fm: FeatureMap) -> list[np.ndarray]:
        return [policy_table(SoftMaxPolicy(th, fm)) for th, _, _ in self.history]

    def average_policy(self, fm: FeatureMap) -> np.ndarray:
        """Uniform mixture over the iterates, as a per-state action distribution.

        This is the action marginal of the randomized policy; its value is the
        average of the iterates' values, see :func:`average_policy_value`.
        """
        return np.mean(self.policies(fm), axis=0)


def average_policy_value(state: ActorState, fm: FeatureMap, mdp: TabularMdp) -> float:
    """Value of the randomized policy that draws one iterate uniformly and follows it."""
    return float(np.mean([policy_value(mdp, TabularPolicy(_renorm(p))) for p in state.policies(fm)]))


def _renorm(p):
    return p / p.sum(axis=1, keepdims=True)


def run_actor_critic(
    ds: Dataset,
    fm: FeatureMap,
    T: int,
    tests_factory: Callable[[np.ndarray], TestSpace],
    rc: RadiusConfig,
    start_dist,
    discount: float,
    eta: float | None = None,
    critic: Callable | None = None,
) -> ActorState:
    """Run T rounds of the pessimistic actor-critic from theta_1 = 0.

    ``tests_factory`` maps the current policy table to a test space.
    ``critic`` optionally replaces the conic critic; it receives
    (policy_table, t) and returns (w_t, v_min_t).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    eta = auto_stepsize(fm.num_actions, T) if eta is None else eta
    state = ActorState(np.zeros(fm.dim), 1, eta)
    cache = SampleCache.build(ds, fm) if len(ds) else None
    F_cache: dict = {}
    for t in range(1, T + 1):
        pol = SoftMaxPolicy(state.theta, fm)
        probs = policy_table(pol)
        if critic is not None:
            w, v = critic(probs, t)
        else:
            tests = tests_factory(probs)
            key = tuple(tests.members)
            if key not in F_cache:
                F_cache.clear()
                F_cache[key] = evaluate_tests(ds, fm, tests)
            fs = build_empirical_set(ds, fm, probs, tests, rc, discount, cache=cache, F=F_cache[key])
            sol = solve_or_raise(fs, AffineObjective(start_objective(fm, probs, start_dist), 0.0, "min"))
            w, v = sol.point, sol.value
        state.history.append((state.theta.copy(), np.asarray(w, dtype=float).copy(), float(v)))
        state.theta = mirror_step(state.theta, w, eta)
        state.t = t + 1
    return state


def write_trace(state: ActorState, path, fm: FeatureMap | None = None, mdp: TabularMdp | None = None) -> None:
    """CSV columns: t, v_min, ||w_t||, ||theta_t||[, V_true(pi_t)]."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        header = ["t", "v_min", "w_norm", "theta_norm"]
        if mdp is not None:
            header.append("v_true")
        wr.writerow(header)
        for t, (theta, w, v) in enumerate(state.history, start=1):
            row = [t, repr(v), repr(float(np.linalg.norm(w))), repr(float(np.linalg.norm(theta)))]
            if mdp is not None:
                row.append(repr(policy_value(mdp, to_tabular(SoftMaxPolicy(theta, fm)))))
            wr.writerow(row)


# -- adversarial MDPs -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AdversarialMdp:
    """Same dynamics as ``base``; reward r + perturbation."""

    base: TabularMdp
    perturbation: np.ndarray

    @property
    def mean_reward(self) -> np.ndarray:
        return self.base.mean_reward + self.perturbation

    def exact_q(self, policy: TabularPolicy) -> np.ndarray:
        mdp = self.base
        S, A = mdp.num_states, mdp.num_actions
        Ppi = (mdp.transition[:, :, :, None] * policy.probs[None, None]).reshape(S * A, S * A)
        q = np.linalg.solve(np.eye(S * A) - mdp.discount * Ppi, self.mean_reward.reshape(-1))
        return q.reshape(S, A)

    def value(self, policy: TabularPolicy) -> float:
        q = self.exact_q(policy)
        return float(self.base.start_dist @ np.sum(policy.probs * q, axis=1))


def adversarial_mdp(mdp: TabularMdp, policy: TabularPolicy, q_hat) -> AdversarialMdp:
    """Perturb rewards by B^pi(q_hat), making q_hat the exact Q-function of pi."""
    return AdversarialMdp(mdp, bellman_error_table(mdp, policy, q_hat))


# -- exponentiated gradient on a simplex ---------------------------------------


def mirror_descent_regret_check(payoffs: Sequence, T: int | None = None, eta: float | None = None) -> float:
    """Average regret of exponentiated-gradient play against the best fixed action.

    ``payoffs`` is a (T, K) array of payoff rows with sup-norm at most 1. The
    best comparator distribution for linear payoffs is a point mass, so the
    maximum over distributions is a maximum over actions.
    """
    F = np.asarray(payoffs, dtype=float)
    if T is not None:
        F = F[:T]
    T, K = F.shape
    if np.max(np.abs(F)) > 1.0 + 1e-12:
        raise ValueError("payoff rows must satisfy ||f_t||_inf <= 1")
    if K == 1:
        return 0.0
    eta = auto_stepsize(K, T) if eta is None else eta
    nu = np.full(K, 1.0 / K)
    earned = 0.0
    for f in F:
        earned += nu @ f
        nu = exponentiated_update_reference(nu, f, eta)
    return float((F.sum(axis=0).max() - earned) / T)


def regret_bound(num_actions: int, T: int) -> float:
    return 2.0 * math.sqrt(2.0 * math.log(num_actions) / T)
