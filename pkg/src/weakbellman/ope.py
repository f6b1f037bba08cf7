"""Confidence intervals for off-policy evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import AffineObjective, Solution, solve_or_raise
from .data import Dataset
from .feasibility import FeasibleSet, RadiusConfig, SampleCache, build_empirical_set, policy_probs
from .features import FeatureMap
from .testfns import TestSpace


@dataclass
class ConfidenceInterval:
    v_min: float
    v_max: float
    w_min: np.ndarray
    w_max: np.ndarray
    rc: RadiusConfig
    status_min: str = "optimal"
    status_max: str = "optimal"

    @property
    def width(self) -> float:
        return self.v_max - self.v_min

    def contains(self, value: float, tol: float = 1e-9) -> bool:
        return self.v_min - tol <= value <= self.v_max + tol

    def record(self, policy_id="pi", v_true: float | None = None) -> dict:
        out = {"policy_id": policy_id, "n": self.rc.n, "rho": self.rc.rho, "lambda": self.rc.lam,
               "v_min": self.v_min, "v_max": self.v_max}
        if v_true is not None:
            out["v_true"] = v_true
        return out


def start_objective(fm: FeatureMap, policy, start_dist) -> np.ndarray:
    """b = E_{s ~ nu}[sum_a pi(a|s) phi(s, a)], so that <b, w> = E_nu[Q_w(S, pi)]."""
    probs = policy_probs(policy)
    return np.einsum("s,sa,sad->d", np.asarray(start_dist, dtype=float), probs, fm.values)


def interval_over(fs: FeasibleSet, b: np.ndarray) -> tuple[Solution, Solution]:
    lo = solve_or_raise(fs, AffineObjective(b, 0.0, "min"))
    hi = solve_or_raise(fs, AffineObjective(b, 0.0, "max"))
    return lo, hi


def confidence_interval(ds: Dataset, fm: FeatureMap, policy, tests: TestSpace, rc: RadiusConfig,
                        start_dist, discount: float, cache: SampleCache | None = None) -> ConfidenceInterval:
    """[min, max] of E_nu[Q(S, pi)] over the empirical feasible set.

    Raises :class:`~weakbellman.conic.InfeasibleSetError` when the set is empty.
    """
    fs = build_empirical_set(ds, fm, policy, tests, rc, discount, cache=cache)
    b = start_objective(fm, policy, start_dist)
    lo, hi = interval_over(fs, b)
    return ConfidenceInterval(lo.value, hi.value, lo.point, hi.point, rc, lo.status, hi.status)


def on_policy_width_bound(rc: RadiusConfig, discount: float) -> float:
    """2 sqrt(1 + lam) / (1 - gamma) * sqrt(rho / n)."""
    return 2.0 * np.sqrt(1.0 + rc.lam) / (1.0 - discount) * rc.half_width


def loglog_slope(ns, widths) -> float:
    return float(np.polyfit(np.log(ns), np.log(widths), 1)[0])


__all__ = ["ConfidenceInterval", "start_objective", "confidence_interval", "interval_over",
           "on_policy_width_bound", "loglog_slope"]
