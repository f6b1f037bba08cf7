"""Adapted datasets drawn from mixtures of behavior protocols.

Each sample picks a protocol index J ~ alpha, draws (s, a) exactly from the
discounted occupancy of that protocol (geometric horizon, no truncation),
then emits a noisy reward and a next state. The identifier is J, optionally
together with the state-action path from the start draw up to (s, a).

Randomness: numpy's Philox counter-based generator keyed by
``(seed, chunk_index)``; samples are produced in fixed chunks of
``CHUNK`` indices, so any chunk can be regenerated independently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .mdp import TabularMdp, TabularPolicy, occupancy

CHUNK = 4096


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    protocols: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "protocols", tuple(self.protocols))
        object.__setattr__(self, "weights", w)
        if len(self.protocols) == 0 or w.shape != (len(self.protocols),):
            raise ValueError("need one weight per protocol")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")

    @classmethod
    def single(cls, policy: TabularPolicy) -> "MixtureSpec":
        return cls((policy,), np.ones(1))

    @property
    def num_components(self) -> int:
        return len(self.protocols)


@dataclass(frozen=True)
class AdaptedSample:
    state: int
    action: int
    identifier: int
    reward: float
    next_state: int
    trajectory: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented quintuples (s, a, o, r, s')."""

    states: np.ndarray
    actions: np.ndarray
    identifiers: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    seed: int = 0
    trajectories: Optional[tuple] = None

    def __post_init__(self):
        for name, dtype in (
            ("states", int), ("actions", int), ("identifiers", int),
            ("rewards", float), ("next_states", int),
        ):
            arr = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.states)
        if any(len(getattr(self, k)) != n for k in ("actions", "identifiers", "rewards", "next_states")):
            raise ValueError("dataset columns differ in length")
        if self.trajectories is not None:
            object.__setattr__(self, "trajectories", tuple(tuple(map(tuple, t)) for t in self.trajectories))
            if len(self.trajectories) != n:
                raise ValueError("one trajectory per sample required")

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> AdaptedSample:
        traj = None if self.trajectories is None else self.trajectories[i]
        return AdaptedSample(
            int(self.states[i]), int(self.actions[i]), int(self.identifiers[i]),
            float(self.rewards[i]), int(self.next_states[i]), traj,
        )

    def __iter__(self) -> Iterator[AdaptedSample]:
        return (self[i] for i in range(len(self)))

    def same_as(self, other: "Dataset") -> bool:
        cols = ("states", "actions", "identifiers", "rewards", "next_states")
        return (
            len(self) == len(other)
            and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in cols)
            and self.trajectories == other.trajectories
        )


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(chunk)]))


def _sample_rows(rng, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of ``probs`` by inverse CDF."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))[:, None] * cdf[:, -1:]
    return np.minimum((u >= cdf).sum(axis=1), probs.shape[1] - 1)


def _sample_chunk(mdp, mix, m, rng, record):
    S = mdp.num_states
    comp = _sample_rows(rng, np.broadcast_to(mix.weights, (m, len(mix.weights))))
    pol = np.stack([p.probs for p in mix.protocols])  # (J, S, A)
    if mdp.discount > 0:
        horizon = rng.geometric(1.0 - mdp.discount, size=m) - 1
    else:
        horizon = np.zeros(m, dtype=int)
    s = _sample_rows(rng, np.broadcast_to(mdp.start_dist, (m, S)))
    a = _sample_rows(rng, pol[comp, s])
    path_s, path_a = [s.copy()], [a.copy()]
    for h in range(int(horizon.max(initial=0))):
        live = horizon > h
        idx = np.nonzero(live)[0]
        s_new = _sample_rows(rng, mdp.transition[s[idx], a[idx]])
        a_new = _sample_rows(rng, pol[comp[idx], s_new])
        s[idx], a[idx] = s_new, a_new
        if record:
            path_s.append(s.copy())
            path_a.append(a.copy())
    r = mdp.sample_reward(s, a, rng)
    s_next = _sample_rows(rng, mdp.transition[s, a])
    traj = None
    if record:
        ps, pa = np.stack(path_s), np.stack(path_a)
        traj = [
            tuple(zip(ps[: horizon[i] + 1, i].tolist(), pa[: horizon[i] + 1, i].tolist()))
            for i in range(m)
        ]
    return s, a, comp, r, s_next, traj


def sample_mixture_dataset(
    mdp: TabularMdp,
    mix: MixtureSpec,
    n: int,
    seed: int,
    record_trajectories: bool = False,
) -> Dataset:
    if n < 0:
        raise ValueError("n must be nonnegative")
    for p in mix.protocols:
        if p.probs.shape != (mdp.num_states, mdp.num_actions):
            raise ValueError("protocol shape does not match mdp")
    cols = [[], [], [], [], []]
    trajs = [] if record_trajectories else None
    for k, start in enumerate(range(0, n, CHUNK)):
        m = min(CHUNK, n - start)
        *parts, traj = _sample_chunk(mdp, mix, m, chunk_rng(seed, k), record_trajectories)
        for col, part in zip(cols, parts):
            col.append(part)
        if record_trajectories:
            trajs.extend(traj)
    if n == 0:
        return Dataset([], [], [], [], [], seed, () if record_trajectories else None)
    s, a, o, r, s2 = (np.concatenate(c) for c in cols)
    return Dataset(s, a, o, r, s2, seed, trajs)


def reference_measure(mdp: TabularMdp, mix: MixtureSpec) -> np.ndarray:
    """mu(s, a, j) = alpha_j d^{rho_j}(s, a), shape (S, A, m)."""
    return np.stack(
        [w * occupancy(mdp, p) for p, w in zip(mix.protocols, mix.weights)], axis=-1
    )


# -- CSV ----------------------------------------------------------------------

CSV_HEADER = ["idx", "s", "a", "o", "r", "s_next"]


def save_dataset_csv(ds: Dataset, path) -> None:
    header = CSV_HEADER + (["traj"] if ds.trajectories is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(ds)):
            row = [i, int(ds.states[i]), int(ds.actions[i]), int(ds.identifiers[i]),
                   repr(float(ds.rewards[i])), int(ds.next_states[i])]
            if ds.trajectories is not None:
                row.append(";".join(f"{s}:{a}" for s, a in ds.trajectories[i]))
            w.writerow(row)


def load_dataset_csv(path, seed: int = 0) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    has_traj = bool(rows) and "traj" in rows[0]
    if not rows:
        with open(path) as fh:
            has_traj = "traj" in fh.readline()
    trajs = None
    if has_traj:
        trajs = [
            tuple(tuple(int(x) for x in tok.split(":")) for tok in row["traj"].split(";") if tok)
            for row in rows
        ]
    return Dataset(
        [int(r["s"]) for r in rows], [int(r["a"]) for r in rows],
        [int(r["o"]) for r in rows], [float(r["r"]) for r in rows],
        [int(r["s_next"]) for r in rows], seed, trajs,
    )


def empirical_histogram(ds: Dataset, num_states: int, num_actions: int, num_components: int) -> np.ndarray:
    counts = np.zeros((num_states, num_actions, num_components))
    np.add.at(counts, (ds.states, ds.actions, ds.identifiers), 1.0)
    return counts / max(len(ds), 1)


def subset(ds: Dataset, idx: Sequence[int]) -> Dataset:
    idx = np.asarray(idx, dtype=int)
    trajs = None if ds.trajectories is None else [ds.trajectories[i] for i in idx]
    return Dataset(ds.states[idx], ds.actions[idx], ds.identifiers[idx],
                   ds.rewards[idx], ds.next_states[idx], ds.seed, trajs)
