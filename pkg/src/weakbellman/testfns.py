"""Test functions f(s, a, o) and finite test spaces.

Every member is bounded by 1 in sup-norm. Members are frozen dataclasses so
that structural equality drives de-duplication in :func:`union`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .features import FeatureMap
from .mdp import TabularMdp, TabularPolicy, bellman_error_table

SUP_TOL = 1e-9


def _tup(x) -> tuple:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return tuple(float(v) for v in arr)
    return tuple(_tup(row) for row in arr)


class TestFunction:
    """Base class; subclasses implement sample and population evaluation."""

    __test__ = False  # keep pytest from collecting this

    def values(self, ds: Dataset, fm: FeatureMap | None = None) -> np.ndarray:
        raise NotImplementedError

    def table(self, fm: FeatureMap | None, num_states: int, num_actions: int, num_components: int) -> np.ndarray:
        """Evaluation over (s, a, o) for a mixture-tagged identifier o."""
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(TestFunction):
    def values(self, ds, fm=None):
        return np.ones(len(ds))

    def table(self, fm, num_states, num_actions, num_components):
        return np.ones((num_states, num_actions, num_components))


@dataclass(frozen=True)
class Indicator(TestFunction):
    component: int

    def values(self, ds, fm=None):
        return (ds.identifiers == self.component).astype(float)

    def table(self, fm, num_states, num_actions, num_components):
        out = np.zeros((num_states, num_actions, num_components))
        if self.component < num_components:
            out[:, :, self.component] = 1.0
        return out


@dataclass(frozen=True)
class LinearVec(TestFunction):
    """f(s, a) = <v, phi(s, a)> with ||v|| <= 1."""

    direction: tuple

    def __post_init__(self):
        object.__setattr__(self, "direction", _tup(self.direction))
        if np.linalg.norm(self.direction) > 1.0 + SUP_TOL:
            raise ValueError("LinearVec direction must have norm <= 1")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.direction)

    def values(self, ds, fm=None):
        if fm is None:
            raise ValueError("LinearVec needs a feature map")
        return fm.values[ds.states, ds.actions] @ self.vector

    def table(self, fm, num_states, num_actions, num_components):
        if fm is None:
            raise ValueError("LinearVec needs a feature map")
        t = fm.values @ self.vector
        return np.repeat(t[:, :, None], num_components, axis=2)


@dataclass(frozen=True)
class TabularTable(TestFunction):
    """Arbitrary bounded function of (s, a)."""

    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", _tup(self.entries))
        if np.max(np.abs(self.entries)) > 1.0 + SUP_TOL:
            raise ValueError(f"tabular test function has sup-norm {np.max(np.abs(self.entries)):.4g} > 1")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries)

    def values(self, ds, fm=None):
        return self.array[ds.states, ds.actions]

    def table(self, fm, num_states, num_actions, num_components):
        return np.repeat(self.array[:, :, None], num_components, axis=2)


@dataclass(frozen=True)
class ImportanceSampling(TestFunction):
    """(1/b) * prod over the recorded path of target(a|s) / behavior(a|s)."""

    target: tuple
    behavior: tuple
    scaling: float

    def __post_init__(self):
        object.__setattr__(self, "target", _tup(self.target))
        object.__setattr__(self, "behavior", _tup(self.behavior))
        if self.scaling <= 0:
            raise ValueError("scaling b must be positive")

    def weight(self, trajectory) -> float:
        pi, beh = np.asarray(self.target), np.asarray(self.behavior)
        ratio = 1.0
        for s, a in trajectory:
            if beh[s, a] == 0.0:
                raise ValueError(f"behavior has zero probability for observed pair ({s}, {a})")
            ratio *= pi[s, a] / beh[s, a]
        return ratio / self.scaling

    def values(self, ds, fm=None):
        if ds.trajectories is None:
            raise ValueError("importance-sampling test needs recorded trajectories")
        out = np.array([self.weight(t) for t in ds.trajectories])
        if len(out) and out.max() > 1.0 + SUP_TOL:
            raise ValueError(f"IS weight {out.max():.4g} exceeds 1; increase the scaling b")
        return out

    def table(self, fm, num_states, num_actions, num_components):
        raise ValueError("importance-sampling tests depend on the full path; no (s, a, j) table")


@dataclass(frozen=True)
class TestSpace:
    __test__ = False

    members: tuple = ()
    tags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        tags = tuple(self.tags) if self.tags else ("",) * len(self.members)
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def identity_test() -> Identity:
    return Identity()


def mixture_indicator_tests(m: int) -> TestSpace:
    if m < 1:
        raise ValueError("need m >= 1")
    return TestSpace([Indicator(j) for j in range(m)], ["indicator"] * m)


def _sign_fix(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    return -v if nz.size and v[nz[0]] < 0 else v


def eigen_test_class(cov) -> TestSpace:
    """Unit eigenvectors of ``cov`` as linear test functions.

    Ordered by descending eigenvalue; the first nonzero coordinate of each
    vector is positive.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, atol=1e-10, rtol=0):
        raise ValueError("covariance must be symmetric")
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2)
    order = np.argsort(-vals, kind="stable")
    members = [LinearVec(_sign_fix(vecs[:, j]) / np.linalg.norm(vecs[:, j])) for j in order]
    return TestSpace(members, ["eigen"] * len(members))


def empirical_covariance(ds: Dataset, fm: FeatureMap) -> np.ndarray:
    phi = fm.values[ds.states, ds.actions]
    return phi.T @ phi / max(len(ds), 1)


def importance_sampling_test(target: TabularPolicy, behavior: TabularPolicy, scaling: float) -> ImportanceSampling:
    return ImportanceSampling(target.probs, behavior.probs, scaling)


def prediction_error_tests(fm: FeatureMap, budget: int | None = None) -> TestSpace:
    """Linear directions spanning the difference class {Q_w - Q_w'}.

    The difference of two linear predictors is linear, so the standard basis
    of R^d is a finite spanning surrogate; ``budget`` keeps the first few.
    """
    budget = fm.dim if budget is None else budget
    if budget < 1:
        raise ValueError("budget must be >= 1")
    members = [LinearVec(np.eye(fm.dim)[j]) for j in range(min(budget, fm.dim))]
    return TestSpace(members, ["pred_error"] * len(members))


def bellman_test_class_tabular(mdp: TabularMdp, policy: TabularPolicy, q_grid: Sequence) -> TestSpace:
    members = []
    for q in q_grid:
        err = bellman_error_table(mdp, policy, q)
        if np.max(np.abs(err)) > 1.0 + SUP_TOL:
            raise ValueError(f"Bellman test function has sup-norm {np.max(np.abs(err)):.4g} > 1")
        members.append(TabularTable(err))
    return TestSpace(members, ["bellman"] * len(members))


def union(spaces: Sequence[TestSpace]) -> TestSpace:
    seen, members, tags = set(), [], []
    for sp in spaces:
        for f, tag in zip(sp.members, sp.tags):
            if f in seen:
                continue
            seen.add(f)
            members.append(f)
            tags.append(tag)
    return TestSpace(members, tags)


def single(f: TestFunction, tag: str = "") -> TestSpace:
    return TestSpace([f], [tag or type(f).__name__.lower()])


def sup_norm(f: TestFunction, fm: FeatureMap | None, num_states: int, num_actions: int, num_components: int = 1) -> float:
    return float(np.max(np.abs(f.table(fm, num_states, num_actions, num_components))))


# -- config strings -------------------------------------------------------------

_TOKEN = re.compile(r"\s*,\s*")


def parse_test_spec(spec: str, *, fm: FeatureMap | None = None, num_components: int = 1,
                    cov=None, target: TabularPolicy | None = None,
                    behavior: TabularPolicy | None = None, is_scaling: float | None = None,
                    budget: int | None = None) -> TestSpace:
    """Build a test space from ``identity|indicators|eigen|is|pred_error|union(a,b,...)``."""
    spec = spec.strip()
    m = re.fullmatch(r"union\((.*)\)", spec)
    if m:
        parts = [p for p in _TOKEN.split(m.group(1)) if p]
        kw = dict(fm=fm, num_components=num_components, cov=cov, target=target,
                  behavior=behavior, is_scaling=is_scaling, budget=budget)
        return union([parse_test_spec(p, **kw) for p in parts])
    if spec == "identity":
        return single(identity_test(), "identity")
    if spec == "indicators":
        return mixture_indicator_tests(num_components)
    if spec == "eigen":
        if cov is None:
            raise ValueError("eigen tests need a covariance matrix")
        return eigen_test_class(cov)
    if spec == "pred_error":
        if fm is None:
            raise ValueError("pred_error tests need a feature map")
        return prediction_error_tests(fm, budget)
    if spec == "is":
        if target is None or behavior is None or is_scaling is None:
            raise ValueError("is tests need target, behavior and scaling")
        return single(importance_sampling_test(target, behavior, is_scaling), "is")
    if spec in ("", "none"):
        return TestSpace()
    raise ValueError(f"unknown test space {spec!r}")
