"""Shared instance generators for the test suite."""

import numpy as np

from weakbellman.conic import AffineObjective
from weakbellman.feasibility import FeasibleSet, SlabConstraint


def random_slab_instance(rng: np.random.Generator, d: int = 2, k: int | None = None):
    """A nonempty random slab set around a point of the unit ball plus a random objective."""
    k = int(rng.integers(1, 5)) if k is None else k
    center = rng.normal(size=d)
    center *= rng.uniform(0, 0.9) / np.linalg.norm(center)
    slabs = []
    for _ in range(k):
        a = rng.normal(size=d)
        tau = rng.uniform(0.05, 0.5)
        slabs.append(SlabConstraint(a, a @ center + rng.uniform(-tau, tau), tau))
    sense = "min" if rng.random() < 0.5 else "max"
    return FeasibleSet(tuple(slabs)), AffineObjective(rng.normal(size=d), float(rng.normal()), sense)
