"""Finite MDPs: exact policy evaluation, occupancy measures and Bellman errors.

Every quantity here is computed by a dense linear solve, so these functions
double as ground truth for the data-driven estimators elsewhere in the package.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ATOL = 1e-12


def _as_readonly(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite discounted MDP.

    ``transition[s, a, s2]`` is P(s2 | s, a). Realized rewards are
    ``mean_reward[s, a] + U(-noise, noise)``.
    """

    transition: np.ndarray
    mean_reward: np.ndarray
    discount: float
    start_dist: np.ndarray
    reward_noise: float = 0.0

    def __post_init__(self):
        P = _as_readonly(self.transition)
        r = _as_readonly(self.mean_reward)
        nu = _as_readonly(self.start_dist)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "mean_reward", r)
        object.__setattr__(self, "start_dist", nu)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        S, A, _ = P.shape
        if S < 1 or A < 1:
            raise ValueError("need at least one state and one action")
        if r.shape != (S, A):
            raise ValueError(f"mean_reward must have shape {(S, A)}, got {r.shape}")
        if nu.shape != (S,):
            raise ValueError(f"start_dist must have shape {(S,)}, got {nu.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > ATOL:
            raise ValueError("transition rows must be nonnegative and sum to 1")
        if np.any(nu < 0) or abs(nu.sum() - 1.0) > ATOL:
            raise ValueError("start_dist must be nonnegative and sum to 1")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        if np.any(r < 0.0) or np.any(r > 1.0):
            raise ValueError("mean rewards must lie in [0, 1]")
        if self.reward_noise < 0:
            raise ValueError("reward_noise must be nonnegative")
        # zero-mean noise is kept exact by refusing widths that would need clipping
        if np.max(r) + self.reward_noise > 1.0 + ATOL:
            raise ValueError("mean_reward + reward_noise exceeds 1; realized |r| <= 1 would need truncation")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def sample_reward(self, s, a, rng: np.random.Generator):
        mean = self.mean_reward[s, a]
        if self.reward_noise == 0.0:
            return np.asarray(mean, dtype=float).copy()
        return mean + rng.uniform(-self.reward_noise, self.reward_noise, size=np.shape(mean))

    def with_reward(self, mean_reward) -> "TabularMdp":
        return TabularMdp(self.transition, mean_reward, self.discount, self.start_dist, self.reward_noise)


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    probs: np.ndarray

    def __post_init__(self):
        p = _as_readonly(self.probs)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise ValueError("policy table must be (S, A)")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > ATOL:
            raise ValueError("policy rows must be nonnegative and sum to 1")

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "TabularPolicy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions, num_actions: int) -> "TabularPolicy":
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(num_actions)[actions])


@dataclass(frozen=True, eq=False)
class QTable:
    values: np.ndarray
    check_bound: bool = field(default=True, compare=False)

    def __post_init__(self):
        v = _as_readonly(self.values)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError("Q table must be (S, A)")
        if self.check_bound and np.max(np.abs(v), initial=0.0) > 1.0 + 1e-9:
            warnings.warn(
                f"|Q| = {np.max(np.abs(v)):.4g} exceeds the unit bound; see rescale_q",
                stacklevel=3,
            )


def rescale_q(q: QTable) -> tuple[QTable, float]:
    """Divide Q by max(1, sup|Q|); returns the rescaled table and the factor."""
    scale = max(1.0, float(np.max(np.abs(q.values), initial=0.0)))
    return QTable(q.values / scale), scale


def _check_pair(mdp: TabularMdp, policy: TabularPolicy):
    if policy.probs.shape != (mdp.num_states, mdp.num_actions):
        raise ValueError(
            f"policy shape {policy.probs.shape} does not match mdp {(mdp.num_states, mdp.num_actions)}"
        )


def state_action_transition(mdp: TabularMdp, policy: TabularPolicy) -> np.ndarray:
    """P^pi as an (SA, SA) matrix: (s,a) -> (s', a') with a' ~ pi(.|s')."""
    _check_pair(mdp, policy)
    S, A = mdp.num_states, mdp.num_actions
    return (mdp.transition[:, :, :, None] * policy.probs[None, None, :, :]).reshape(S * A, S * A)


def exact_q(mdp: TabularMdp, policy: TabularPolicy) -> QTable:
    """Solve Q = r + gamma P^pi Q by dense LU."""
    S, A = mdp.num_states, mdp.num_actions
    M = np.eye(S * A) - mdp.discount * state_action_transition(mdp, policy)
    q = np.linalg.solve(M, mdp.mean_reward.reshape(-1))
    return QTable(q.reshape(S, A), check_bound=False)


def occupancy(mdp: TabularMdp, policy: TabularPolicy) -> np.ndarray:
    """Normalized discounted state-action occupancy d^pi, shape (S, A).

    Solves the flow equations d = (1-gamma) nu_pi + gamma (P^pi)^T d.
    """
    S, A = mdp.num_states, mdp.num_actions
    Ppi = state_action_transition(mdp, policy)
    init = (mdp.start_dist[:, None] * policy.probs).reshape(-1)
    d = np.linalg.solve(np.eye(S * A) - mdp.discount * Ppi.T, (1.0 - mdp.discount) * init)
    d = np.clip(d, 0.0, None)
    return (d / d.sum()).reshape(S, A)


def next_value(mdp: TabularMdp, policy: TabularPolicy, q) -> np.ndarray:
    """E[Q(s', pi) | s, a] as an (S, A) table."""
    q = q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)
    v = np.sum(policy.probs * q, axis=1)
    return mdp.transition @ v


def bellman_error_table(mdp: TabularMdp, policy: TabularPolicy, q) -> np.ndarray:
    """B^pi(Q)(s,a) = Q(s,a) - r(s,a) - gamma E[Q(s', pi)]."""
    _check_pair(mdp, policy)
    qv = q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)
    return qv - mdp.mean_reward - mdp.discount * next_value(mdp, policy, qv)


def value_from_start(q, policy: TabularPolicy, start) -> float:
    qv = q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)
    return float(np.asarray(start, dtype=float) @ np.sum(policy.probs * qv, axis=1))


def policy_value(mdp: TabularMdp, policy: TabularPolicy) -> float:
    return value_from_start(exact_q(mdp, policy), policy, mdp.start_dist)


# -- fixtures -----------------------------------------------------------------


def random_mdp(
    rng: np.random.Generator,
    num_states: int,
    num_actions: int,
    discount: float,
    reward_scale: float = 1.0,
    reward_noise: float = 0.0,
    concentration: float = 1.0,
) -> TabularMdp:
    P = rng.dirichlet(np.full(num_states, concentration), size=(num_states, num_actions))
    r = reward_scale * rng.uniform(0.0, 1.0, size=(num_states, num_actions))
    r = np.minimum(r, 1.0 - reward_noise)
    nu = rng.dirichlet(np.ones(num_states))
    return TabularMdp(P, r, discount, nu, reward_noise)


def random_policy(rng: np.random.Generator, num_states: int, num_actions: int) -> TabularPolicy:
    return TabularPolicy(rng.dirichlet(np.ones(num_actions), size=num_states))


def gridworld(discount: float = 0.5, slip: float = 0.1, reward_noise: float = 0.05) -> TabularMdp:
    """Five-cell corridor with actions left/right.

    The intended move succeeds with probability ``1 - slip``, otherwise the
    agent stays put. Reward grows toward the right end; the start is cell 0.
    Rewards are small enough that Q^pi fits the unit ball of one-hot weights
    for every policy.
    """
    S, A = 5, 2
    P = np.zeros((S, A, S))
    for s in range(S):
        for a, step in enumerate((-1, 1)):
            s2 = min(max(s + step, 0), S - 1)
            P[s, a, s2] += 1.0 - slip
            P[s, a, s] += slip
    r = np.tile(np.array([0.0, 0.02, 0.05, 0.10, 0.15])[:, None], (1, A))
    r[:, 1] += 0.01
    nu = np.zeros(S)
    nu[0] = 1.0
    return TabularMdp(P, r, discount, nu, reward_noise)


def gridworld_policy(p_right: float = 0.8) -> TabularPolicy:
    return TabularPolicy(np.tile([1.0 - p_right, p_right], (5, 1)))


# -- plain-text format ---------------------------------------------------------
#
#   S A gamma [noise]
#   s a r p(s'=0) ... p(s'=S-1)        (S*A rows, any order)
#   start nu(0) ... nu(S-1)
#
# Blank lines and lines starting with '#' are ignored.


def load_mdp(path) -> TabularMdp:
    lines = [
        ln.split("#", 1)[0].strip()
        for ln in Path(path).read_text().splitlines()
    ]
    lines = [ln for ln in lines if ln]
    head = lines[0].split()
    S, A, gamma = int(head[0]), int(head[1]), float(head[2])
    noise = float(head[3]) if len(head) > 3 else 0.0
    P = np.full((S, A, S), np.nan)
    r = np.full((S, A), np.nan)
    start = None
    for ln in lines[1:]:
        tok = ln.split()
        if tok[0] == "start":
            start = np.array([float(x) for x in tok[1:]])
            continue
        s, a = int(tok[0]), int(tok[1])
        r[s, a] = float(tok[2])
        P[s, a] = [float(x) for x in tok[3:]]
    if start is None or np.isnan(P).any() or np.isnan(r).any():
        raise ValueError(f"{path}: incomplete MDP description")
    return TabularMdp(P, r, gamma, start, noise)


def save_mdp(mdp: TabularMdp, path) -> None:
    S, A = mdp.num_states, mdp.num_actions
    out = [f"{S} {A} {mdp.discount!r} {mdp.reward_noise!r}"]
    for s in range(S):
        for a in range(A):
            probs = " ".join(repr(float(p)) for p in mdp.transition[s, a])
            out.append(f"{s} {a} {float(mdp.mean_reward[s, a])!r} {probs}")
    out.append("start " + " ".join(repr(float(p)) for p in mdp.start_dist))
    Path(path).write_text("\n".join(out) + "\n")


def two_armed_bandit(means=(0.8, 0.2), reward_noise: float = 0.2) -> TabularMdp:
    """One state, two arms, no discounting; rewards are mean +/- uniform noise."""
    means = np.asarray(means, dtype=float)
    A = len(means)
    return TabularMdp(np.ones((1, A, 1)), means[None, :], 0.0, np.ones(1), reward_noise)
