"""Affine objectives over the unit ball intersected with two-sided slabs.

The problem

    optimize  <b, w> + c0   s.t.  ||w||_2 <= 1,   |<g_k, w> - o_k| <= tau_k

is a small second-order cone program. It is solved by a primal-dual
interior-point method (ball written as the convex quadratic
(||w||^2 - R^2) / 2 <= 0, slabs as pairs of affine inequalities, dense
Newton/KKT solve per iteration). A strictly feasible start comes from a
phase-one problem; zero-width slabs are eliminated as equalities first.

Optimality is certified by the Lagrange dual of the ball-plus-affine
problem, which has the closed form

    g(lam) = -R ||b + A^T lam|| - h^T lam,     lam >= 0,

so every returned value carries a rigorous lower (resp. upper) bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .feasibility import FeasibleSet

MAX_ITER = 200
INFEAS_TOL = 1e-8
KKT_TOL = 1e-6


@dataclass(frozen=True)
class AffineObjective:
    linear: np.ndarray
    constant: float = 0.0
    sense: str = "min"

    def __post_init__(self):
        b = np.array(self.linear, dtype=float).reshape(-1)
        b.setflags(write=False)
        object.__setattr__(self, "linear", b)
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if not np.all(np.isfinite(b)) or not np.isfinite(self.constant):
            raise ValueError("objective must be finite")

    def __call__(self, w) -> float:
        return float(self.linear @ np.asarray(w, dtype=float) + self.constant)


@dataclass
class Solution:
    point: np.ndarray | None
    value: float
    status: str
    kkt_residual: float = np.inf
    dual_bound: float = np.nan
    iterations: int = 0
    infeasibility: float = 0.0  # smallest uniform slab widening that restores feasibility
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class InfeasibleSetError(RuntimeError):
    def __init__(self, message: str, slack: float):
        super().__init__(message)
        self.slack = slack


# -- generic primal-dual interior point ----------------------------------------


def _pdip(c, quads, A, h, x0, max_iter=MAX_ITER, tol=1e-11, stop=None):
    """min c^T x  s.t.  x^T P x / 2 + p^T x + r <= 0 (each quad),  A x <= h.

    ``x0`` must be strictly feasible. Returns (x, lam_quad, lam_lin, iters, converged).
    """
    nq, nl = len(quads), A.shape[0]
    m = nq + nl
    x = np.array(x0, dtype=float)
    lam = np.ones(m)

    def fvals(x):
        fq = [0.5 * x @ P @ x + p @ x + r for P, p, r in quads]
        return np.concatenate([fq, A @ x - h])

    def jac(x):
        rows = [P @ x + p for P, p, _ in quads]
        return np.vstack(rows + [A]) if m else np.zeros((0, len(x)))

    def hess_l(lam):
        H = np.zeros((len(x), len(x)))
        for k, (P, _, _) in enumerate(quads):
            H += lam[k] * P
        return H

    mu, alpha, beta = 10.0, 0.01, 0.5
    f = fvals(x)
    if np.any(f >= 0):
        raise ValueError("starting point is not strictly feasible")
    for it in range(1, max_iter + 1):
        eta = -f @ lam
        t = mu * m / max(eta, 1e-300)
        Df = jac(x)
        r_dual = c + Df.T @ lam
        r_cent = -lam * f - 1.0 / t
        if np.linalg.norm(r_dual) <= tol * (1 + np.linalg.norm(c)) and eta <= tol:
            return x, lam[:nq], lam[nq:], it, True
        if stop is not None and stop(x):
            return x, lam[:nq], lam[nq:], it, True
        H = hess_l(lam) + Df.T @ ((-lam / f)[:, None] * Df)
        rhs = -(r_dual + Df.T @ (r_cent / f))
        try:
            dx = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(H, rhs, rcond=None)[0]
        dlam = -(lam * (Df @ dx) - r_cent) / f
        neg = dlam < 0
        s = min(1.0, 0.99 * np.min(-lam[neg] / dlam[neg])) if neg.any() else 1.0
        res0 = np.sqrt(r_dual @ r_dual + r_cent @ r_cent)
        while True:
            xn = x + s * dx
            fn = fvals(xn)
            if np.all(fn < 0):
                ln = lam + s * dlam
                rd = c + jac(xn).T @ ln
                rc = -ln * fn - 1.0 / t
                if np.sqrt(rd @ rd + rc @ rc) <= (1 - alpha * s) * res0 or s < 1e-12:
                    break
            s *= beta
            if s < 1e-16:
                return x, lam[:nq], lam[nq:], it, False
        x, lam, f = xn, ln, fn
    return x, lam[:nq], lam[nq:], max_iter, False


# -- problem reduction ---------------------------------------------------------


@dataclass
class _Reduced:
    """w = w0 + N z with ||z|| <= radius and G z <= hvec."""

    w0: np.ndarray
    N: np.ndarray
    radius: float
    G: np.ndarray
    hvec: np.ndarray
    bad: float = 0.0  # positive when a trivial contradiction was detected


def _reduce(fs: FeasibleSet, d: int) -> _Reduced:
    eq_rows, eq_rhs, ineq = [], [], []
    bad = 0.0
    for sl in fs.slabs:
        g = np.asarray(sl.direction, dtype=float)
        gn = np.linalg.norm(g)
        if not np.isfinite(sl.half_width):
            continue
        if gn < 1e-14:
            bad = max(bad, abs(sl.offset) - sl.half_width)
            continue
        if sl.half_width <= 1e-13 * gn:
            eq_rows.append(g / gn)
            eq_rhs.append(sl.offset / gn)
        else:
            ineq.append((g / gn, sl.offset / gn, sl.half_width / gn))
    R = fs.ball_radius
    if eq_rows:
        E, e = np.array(eq_rows), np.array(eq_rhs)
        w0 = np.linalg.lstsq(E, e, rcond=None)[0]
        bad = max(bad, float(np.max(np.abs(E @ w0 - e))))
        N = null_space(E)
        rad2 = R * R - w0 @ w0
        if rad2 < 0:
            bad = max(bad, np.sqrt(w0 @ w0) - R)
        radius = np.sqrt(max(rad2, 0.0))
    else:
        w0, N, radius = np.zeros(d), np.eye(d), R
    G, hv = [], []
    for g, o, tau in ineq:
        gz = N.T @ g
        base = g @ w0
        G += [gz, -gz]
        hv += [o + tau - base, -(o - tau) + base]
    k = N.shape[1]
    G = np.array(G).reshape(-1, k)
    return _Reduced(w0, N, radius, G, np.array(hv, dtype=float), bad)


def _dual_bound(cz, red: _Reduced, lam_lin) -> float:
    lam = np.clip(lam_lin, 0.0, None)
    return float(-red.radius * np.linalg.norm(cz + red.G.T @ lam) - red.hvec @ lam)


def _phase_one(red: _Reduced):
    """Minimize s s.t. ||z||^2/2 - R^2/2 <= s and G z - h <= s.

    Returns (z, s, certified_lower_bound).
    """
    k = red.N.shape[1]
    R = red.radius
    m = red.G.shape[0]
    if k == 0:
        s = float(np.max(-red.hvec, initial=-np.inf))
        return np.zeros(0), (s if m else -1.0), (s if m else -1.0)
    P = np.zeros((k + 1, k + 1))
    P[:k, :k] = np.eye(k)
    p = np.zeros(k + 1)
    p[k] = -1.0
    A = np.hstack([red.G, -np.ones((m, 1))])
    z0 = np.zeros(k)
    s0 = max(-0.5 * R * R, float(np.max(-red.hvec, initial=-np.inf))) + 1.0
    c = np.zeros(k + 1)
    c[k] = 1.0
    # the certificate only has to resolve INFEAS_TOL, so a looser tolerance suffices
    x, lq, ll, _, _ = _pdip(c, [(P, p, -0.5 * R * R)], A, red.hvec, np.append(z0, s0), tol=1e-9)
    lam0, lam = float(lq[0]), np.clip(ll, 0, None)
    tot = lam0 + lam.sum()
    if tot > 0:
        lam0, lam = lam0 / tot, lam / tot
        v = red.G.T @ lam
        lower = (-(v @ v) / (2 * lam0) if lam0 > 1e-300 else (-np.inf if v @ v > 0 else 0.0)) \
            - 0.5 * lam0 * R * R - red.hvec @ lam
    else:
        lower = -np.inf
    return x[:k], float(x[k]), float(lower)


def minimal_slack(fs: FeasibleSet, d: int) -> float:
    """Smallest t >= 0 such that widening every slab by t makes the set nonempty."""
    if not fs.slabs:
        return 0.0
    G = np.array([np.asarray(sl.direction, dtype=float) for sl in fs.slabs]).reshape(-1, d)
    o = np.array([sl.offset for sl in fs.slabs])
    tau = np.array([sl.half_width for sl in fs.slabs])
    fin = np.isfinite(tau)
    G, o, tau = G[fin], o[fin], tau[fin]
    if len(G) == 0:
        return 0.0
    # min t  s.t. ||w||^2/2 <= R^2/2,  |G w - o| - tau <= t
    P = np.zeros((d + 1, d + 1))
    P[:d, :d] = np.eye(d)
    A = np.vstack([np.hstack([G, -np.ones((len(G), 1))]), np.hstack([-G, -np.ones((len(G), 1))])])
    h = np.concatenate([o + tau, -o + tau])
    t0 = float(np.max(np.abs(o) - tau)) + 1.0
    R = fs.ball_radius
    c = np.zeros(d + 1)
    c[d] = 1.0
    x, *_ = _pdip(c, [(P, np.zeros(d + 1), -0.5 * R * R * (1 - 1e-12))], A, h, np.append(np.zeros(d), t0))
    return max(0.0, float(x[d]))


# -- public API ----------------------------------------------------------------


def solve(fs: FeasibleSet, obj: AffineObjective, max_iter: int = MAX_ITER) -> Solution:
    d = len(obj.linear)
    sign = 1.0 if obj.sense == "min" else -1.0
    c_full = sign * obj.linear
    red = _reduce(fs, d)
    if red.bad > INFEAS_TOL:
        slack = minimal_slack(fs, d)
        return Solution(None, np.nan, "infeasible", infeasibility=slack)
    k = red.N.shape[1]
    cz = red.N.T @ c_full
    offset = float(c_full @ red.w0)

    z_start, s_star, lower = _phase_one(red)
    if lower > INFEAS_TOL or (k == 0 and s_star > INFEAS_TOL):
        return Solution(None, np.nan, "infeasible", infeasibility=minimal_slack(fs, d))
    if s_star >= 0.0:
        # Interior is empty or numerically thin; fall back to the phase-one point.
        w = red.w0 + red.N @ z_start
        val = obj(w)
        return Solution(w, val, "max_iter", kkt_residual=np.inf, dual_bound=np.nan,
                        info={"phase_one": s_star})

    if k == 0 or np.linalg.norm(cz) == 0.0:
        w = red.w0 + red.N @ z_start
        return Solution(w, obj(w), "optimal", kkt_residual=0.0, dual_bound=obj(w))

    P = np.eye(k)
    quads = [(P, np.zeros(k), -0.5 * red.radius ** 2)]
    z, lq, ll, iters, conv = _pdip(cz, quads, red.G, red.hvec, z_start, max_iter=max_iter)
    w = red.w0 + red.N @ z
    primal = float(cz @ z) + offset
    dual = _dual_bound(cz, red, ll) + offset
    # KKT residual in the reduced problem: stationarity, complementarity, feasibility.
    fq = 0.5 * (z @ z - red.radius ** 2)
    fl = red.G @ z - red.hvec
    stat = cz + lq[0] * z + red.G.T @ ll
    kkt = max(
        float(np.max(np.abs(stat), initial=0.0)),
        float(abs(lq[0] * fq)),
        float(np.max(np.abs(ll * fl), initial=0.0)),
        max(0.0, float(fq), float(np.max(fl, initial=0.0))),
    )
    gap = primal - dual
    scale = 1.0 + abs(primal)
    status = "optimal" if (gap <= 1e-7 * scale and kkt <= KKT_TOL) else "max_iter"
    value = sign * primal + obj.constant
    bound = sign * dual + obj.constant
    return Solution(w, value, status, kkt_residual=kkt, dual_bound=bound, iterations=iters,
                    info={"gap": gap, "converged": conv})


def solve_or_raise(fs: FeasibleSet, obj: AffineObjective) -> Solution:
    sol = solve(fs, obj)
    if sol.status == "infeasible":
        raise InfeasibleSetError(
            f"feasible set is empty; widening every slab by {sol.infeasibility:.3g} "
            "(larger rho) would restore feasibility",
            sol.infeasibility,
        )
    return sol


def brute_force_solve(fs: FeasibleSet, obj: AffineObjective, resolution: float = 1e-3) -> float:
    """Grid search over the ball; returns nan when no grid point is feasible."""
    d = len(obj.linear)
    if d > 3:
        raise ValueError("brute force is limited to d <= 3")
    R = fs.ball_radius
    axis = np.arange(-R, R + resolution / 2, resolution)
    if d == 1:
        pts = axis[:, None]
    else:
        pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.einsum("ij,ij->i", pts, pts) <= R * R
    for sl in fs.slabs:
        if not np.isfinite(sl.half_width):
            continue
        keep &= np.abs(pts @ np.asarray(sl.direction) - sl.offset) <= sl.half_width
    if not keep.any():
        return np.nan
    vals = pts[keep] @ obj.linear + obj.constant
    return float(vals.min() if obj.sense == "min" else vals.max())


# -- JSON round trip -------------------------------------------------------------


def problem_to_dict(fs: FeasibleSet, obj: AffineObjective) -> dict:
    out = fs.to_dict()
    out["objective"] = {"linear": obj.linear.tolist(), "constant": obj.constant, "sense": obj.sense}
    return out


def problem_from_dict(payload: dict) -> tuple[FeasibleSet, AffineObjective]:
    fs = FeasibleSet.from_dict(payload)
    o = payload["objective"]
    return fs, AffineObjective(o["linear"], o.get("constant", 0.0), o.get("sense", "min"))
