"""Linear predictor class and the soft-max policy class."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .mdp import QTable, TabularPolicy


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """phi[s, a] in R^d with ||phi(s, a)||_2 <= 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 3:
            raise ValueError("feature table must be (S, A, d)")
        norm = np.linalg.norm(v, axis=2).max()
        if norm > 1.0 + 1e-12:
            raise ValueError(f"feature norm {norm:.4g} > 1; use FeatureMap.rescaled")

    @classmethod
    def rescaled(cls, values) -> "FeatureMap":
        v = np.asarray(values, dtype=float)
        return cls(v / max(1.0, np.linalg.norm(v, axis=2).max()))

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def num_states(self) -> int:
        return self.values.shape[0]

    @property
    def num_actions(self) -> int:
        return self.values.shape[1]

    def __call__(self, s, a) -> np.ndarray:
        return self.values[s, a]

    def policy_features(self, policy, s) -> np.ndarray:
        """phi(s, pi) = sum_a pi(a|s) phi(s, a); vectorized over s."""
        probs = policy.probs if isinstance(policy, TabularPolicy) else policy_table(policy)
        return np.einsum("...a,...ad->...d", probs[s], self.values[s])

    def q_table(self, w) -> np.ndarray:
        return self.values @ np.asarray(w, dtype=float)


@dataclass(frozen=True, eq=False)
class LinearQ:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if np.linalg.norm(w) > 1.0 + 1e-9:
            raise ValueError("LinearQ weights must satisfy ||w|| <= 1")


def q_value(lq: LinearQ, fm: FeatureMap, s, a):
    if lq.weights.shape[0] != fm.dim:
        raise ValueError(f"weight dim {lq.weights.shape[0]} != feature dim {fm.dim}")
    return fm(s, a) @ lq.weights


def as_qtable(lq: LinearQ, fm: FeatureMap) -> QTable:
    return QTable(fm.q_table(lq.weights), check_bound=False)


@dataclass(frozen=True, eq=False)
class SoftMaxPolicy:
    """pi(a|s) proportional to exp(<phi(s, a), theta>)."""

    theta: np.ndarray
    feature_map: FeatureMap

    def __post_init__(self):
        th = np.array(self.theta, dtype=float).reshape(-1)
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)
        if th.shape[0] != self.feature_map.dim:
            raise ValueError("theta dimension does not match feature map")


def softmax_probs(p: SoftMaxPolicy, s) -> np.ndarray:
    logits = p.feature_map.values[s] @ p.theta
    return np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))


def policy_table(p: SoftMaxPolicy) -> np.ndarray:
    return softmax_probs(p, np.arange(p.feature_map.num_states))


def to_tabular(p: SoftMaxPolicy) -> TabularPolicy:
    probs = policy_table(p)
    return TabularPolicy(probs / probs.sum(axis=1, keepdims=True))


def tabular_feature_map(num_states: int, num_actions: int) -> FeatureMap:
    if num_states < 1 or num_actions < 1:
        raise ValueError("sizes must be positive")
    d = num_states * num_actions
    return FeatureMap(np.eye(d).reshape(num_states, num_actions, d))


def weights_from_q(q, max_norm: float = 1.0) -> np.ndarray:
    """vec(Q) scaled into the unit ball: the tabular embedding of a Q table."""
    qv = q.values if isinstance(q, QTable) else np.asarray(q, dtype=float)
    w = qv.reshape(-1)
    return w / max(max_norm, np.linalg.norm(w))


def load_feature_csv(path, num_states: int | None = None, num_actions: int | None = None) -> FeatureMap:
    """Rows ``s,a,phi_1,...,phi_d`` with a header line."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    arr = np.array(rows)
    S = num_states or int(arr[:, 0].max()) + 1
    A = num_actions or int(arr[:, 1].max()) + 1
    vals = np.full((S, A, arr.shape[1] - 2), np.nan)
    vals[arr[:, 0].astype(int), arr[:, 1].astype(int)] = arr[:, 2:]
    if np.isnan(vals).any():
        raise ValueError(f"{path}: missing state-action rows")
    return FeatureMap(vals)


def save_feature_csv(fm: FeatureMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "a"] + [f"phi_{j + 1}" for j in range(fm.dim)])
        for s in range(fm.num_states):
            for a in range(fm.num_actions):
                w.writerow([s, a] + [repr(float(x)) for x in fm.values[s, a]])
