"""Config-driven experiment runner.

A config is an INI-style file (stdlib :mod:`configparser`): flat ``key = value``
pairs under section headers. Relative paths resolve against the config's
directory. Every run is a pure function of (config, seed); records are
aggregated in seed order so the CSV output is byte-for-byte reproducible.

Example::

    [experiment]
    mode = coverage
    seeds = 0-199

    [mdp]
    source = gridworld

    [policy]
    target = tilt:0.8

    [data]
    behavior = tilt:0.8
    n = 2000

    [tests]
    spec = identity

    [radius]
    delta = 0.1
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .actor_critic import average_policy_value, mirror_descent_regret_check, regret_bound, run_actor_critic
from .conic import InfeasibleSetError
from .data import MixtureSpec, sample_mixture_dataset
from .feasibility import RadiusConfig, radius_parametric
from .features import FeatureMap, load_feature_csv, tabular_feature_map
from .mdp import TabularMdp, TabularPolicy, load_mdp, policy_value, two_armed_bandit
from .opc import opc_report
from .ope import confidence_interval, loglog_slope
from .testfns import empirical_covariance, parse_test_spec

MODES = ("evaluate", "optimize", "opc", "coverage", "regret")
ASSETS = Path(__file__).parent / "assets"
BUILTIN_MDPS = {"gridworld": lambda: load_mdp(ASSETS / "gridworld.mdp"), "bandit": two_armed_bandit}

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def parse_seeds(text: str) -> list[int]:
    """``0-9``, ``1,4,7`` or a mix of both."""
    seeds = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "-" in tok[1:]:
            lo, hi = tok.split("-", 1) if not tok.startswith("-") else (tok, tok)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(tok))
    return sorted(set(seeds))


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    seeds: tuple
    mdp_source: str = "gridworld"
    discount: float | None = None
    feature_source: str = "tabular"
    target: str = "uniform"
    behavior: tuple = ("target",)
    weights: tuple = ()
    n: tuple = (1000,)
    tests: str = "identity"
    budget: int | None = None
    is_scaling: float | None = None
    delta: float = 0.1
    c_universal: float = 1.0
    rho: float | None = None
    lam: float | None = None
    T: tuple = (100,)
    eta: float | None = None
    actions: tuple = (2,)
    sample_budget: int = 16
    out: str = "results"
    base_dir: str = "."

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.weights and len(self.weights) != len(self.behavior):
            raise ConfigError("one mixture weight per behavior protocol")
        for src in (self.mdp_source, self.feature_source):
            if src not in BUILTIN_MDPS and src != "tabular" and not self.resolve(src).exists():
                raise ConfigError(f"file not found: {self.resolve(src)}")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def canonical(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k not in ("base_dir", "out", "seeds")}
        return json.loads(json.dumps(out))

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    return parse_config(path.read_text(), base_dir=str(path.parent))


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    def get(section, key, default=None):
        return cp.get(section, key, fallback=default) if cp.has_section(section) else default

    def opt_float(section, key):
        v = get(section, key)
        return None if v in (None, "") else float(v)

    try:
        behavior = tuple(b.strip() for b in get("data", "behavior", "target").split(";") if b.strip())
        budget = get("tests", "budget")
        return ExperimentConfig(
            mode=get("experiment", "mode", ""),
            seeds=tuple(parse_seeds(get("experiment", "seeds", "0"))),
            mdp_source=get("mdp", "source", "gridworld"),
            discount=opt_float("mdp", "discount"),
            feature_source=get("features", "source", "tabular"),
            target=get("policy", "target", "uniform"),
            behavior=behavior,
            weights=tuple(_floats(get("data", "weights", ""))),
            n=tuple(int(x) for x in _floats(get("data", "n", "1000"))),
            tests=get("tests", "spec", "identity"),
            budget=None if budget in (None, "") else int(budget),
            is_scaling=opt_float("tests", "is_scaling"),
            delta=float(get("radius", "delta", "0.1")),
            c_universal=float(get("radius", "c_universal", "1.0")),
            rho=opt_float("radius", "rho"),
            lam=opt_float("radius", "lambda"),
            T=tuple(int(x) for x in _floats(get("optimize", "T", "100"))),
            eta=opt_float("optimize", "eta"),
            actions=tuple(int(x) for x in _floats(get("regret", "actions", "2"))),
            sample_budget=int(get("opc", "sample_budget", "16")),
            out=get("experiment", "out", "results"),
            base_dir=base_dir,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# -- pipeline pieces ---------------------------------------------------------------


def build_mdp(cfg: ExperimentConfig) -> TabularMdp:
    mdp = BUILTIN_MDPS[cfg.mdp_source]() if cfg.mdp_source in BUILTIN_MDPS else load_mdp(cfg.resolve(cfg.mdp_source))
    if cfg.discount is not None:
        mdp = TabularMdp(mdp.transition, mdp.mean_reward, cfg.discount, mdp.start_dist, mdp.reward_noise)
    return mdp


def build_features(cfg: ExperimentConfig, mdp: TabularMdp) -> FeatureMap:
    if cfg.feature_source == "tabular":
        return tabular_feature_map(mdp.num_states, mdp.num_actions)
    return load_feature_csv(cfg.resolve(cfg.feature_source), mdp.num_states, mdp.num_actions)


def parse_policy(spec: str, mdp: TabularMdp, cfg: ExperimentConfig | None = None) -> TabularPolicy:
    """``uniform``, ``tilt:p`` (mass p on the last action, rest uniform) or a whitespace table file."""
    S, A = mdp.num_states, mdp.num_actions
    spec = spec.strip()
    if spec == "uniform":
        return TabularPolicy.uniform(S, A)
    if spec.startswith("tilt:"):
        p = float(spec[5:])
        if A == 1:
            return TabularPolicy.uniform(S, 1)
        row = np.full(A, (1.0 - p) / (A - 1))
        row[-1] = p
        return TabularPolicy(np.tile(row, (S, 1)))
    path = cfg.resolve(spec) if cfg is not None else Path(spec)
    if not path.exists():
        raise ConfigError(f"unknown policy {spec!r}")
    return TabularPolicy(np.loadtxt(path, ndmin=2))


def build_mixture(cfg: ExperimentConfig, mdp: TabularMdp) -> MixtureSpec:
    protos = [parse_policy(cfg.target if b == "target" else b, mdp, cfg) for b in cfg.behavior]
    weights = cfg.weights or (1.0 / len(protos),) * len(protos)
    return MixtureSpec(tuple(protos), np.asarray(weights) / np.sum(weights))


def radius_for(cfg: ExperimentConfig, d: int, n: int) -> RadiusConfig:
    rho = cfg.rho if cfg.rho is not None else radius_parametric(d, n, cfg.delta, cfg.c_universal)
    lam = cfg.lam if cfg.lam is not None else 4.0 * rho / n
    return RadiusConfig(rho, lam, n, cfg.c_universal, cfg.delta)


def derived_seed(seed: int, *keys: int) -> int:
    """Independent per-(seed, keys) substream seed."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint32)[0])


def _uses(cfg, name: str) -> bool:
    return re.search(rf"\b{name}\b", cfg.tests) is not None


def _tests(cfg, ds, fm, mix, target):
    behavior = mix.protocols[0] if mix.num_components == 1 else None
    cov = empirical_covariance(ds, fm) if ds is not None and _uses(cfg, "eigen") else None
    return parse_test_spec(cfg.tests, fm=fm, num_components=mix.num_components, cov=cov, target=target,
                           behavior=behavior, is_scaling=cfg.is_scaling, budget=cfg.budget)


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    rows: list = field(default_factory=list)
    wall_time: float = 0.0


def _run_evaluate(cfg, seed):
    mdp = build_mdp(cfg)
    fm = build_features(cfg, mdp)
    target = parse_policy(cfg.target, mdp, cfg)
    mix = build_mixture(cfg, mdp)
    v_true = policy_value(mdp, target)
    rows = []
    for k, n in enumerate(cfg.n):
        ds = sample_mixture_dataset(mdp, mix, n, derived_seed(seed, k), record_trajectories=_uses(cfg, "is"))
        rc = radius_for(cfg, fm.dim, n)
        ci = confidence_interval(ds, fm, target, _tests(cfg, ds, fm, mix, target), rc, mdp.start_dist, mdp.discount)
        rows.append({"seed": seed, "n": n, "rho": rc.rho, "lambda": rc.lam, "v_min": ci.v_min, "v_max": ci.v_max,
                     "width": ci.width, "v_true": v_true, "covered": int(ci.contains(v_true))})
    return rows


def _run_optimize(cfg, seed):
    mdp = build_mdp(cfg)
    fm = build_features(cfg, mdp)
    mix = build_mixture(cfg, mdp)
    n = cfg.n[0]
    ds = sample_mixture_dataset(mdp, mix, n, derived_seed(seed, 0))
    rc = radius_for(cfg, fm.dim, n)
    fixed = _tests(cfg, ds, fm, mix, None) if not _uses(cfg, "is") else None
    rows = []
    for T in cfg.T:
        state = run_actor_critic(ds, fm, T, lambda probs: fixed, rc, mdp.start_dist, mdp.discount, cfg.eta)
        avg = state.average_policy(fm)
        value = average_policy_value(state, fm, mdp)
        best = int(np.argmax(mdp.mean_reward[0])) if mdp.num_states == 1 else -1
        rows.append({"seed": seed, "T": T, "eta": state.eta, "avg_value": value,
                     "best_arm_mass": float(avg[0, best]) if best >= 0 else float("nan"),
                     "final_v_min": state.history[-1][2]})
    return rows


def _run_opc(cfg, seed):
    mdp = build_mdp(cfg)
    fm = build_features(cfg, mdp)
    target = parse_policy(cfg.target, mdp, cfg)
    mix = build_mixture(cfg, mdp)
    n = cfg.n[0]
    rc = radius_for(cfg, fm.dim, n)
    tests = _tests(cfg, None, fm, mix, target)
    rep = opc_report(mdp, mix, fm, target, tests, rc, tag=cfg.tests, sample_budget=cfg.sample_budget)
    return [{"seed": seed, "quantity": k, "value": float(v)} for k, v in rep.rows()]


def _run_regret(cfg, seed):
    rows = []
    for i, K in enumerate(cfg.actions):
        for j, T in enumerate(cfg.T):
            rng = np.random.default_rng(derived_seed(seed, i, j))
            payoffs = rng.choice([-1.0, 1.0], size=(T, K))
            reg = mirror_descent_regret_check(payoffs)
            bound = regret_bound(K, T) if K > 1 else 0.0
            rows.append({"seed": seed, "actions": K, "T": T, "regret": reg, "bound": bound,
                         "within": int(reg <= bound + 1e-12)})
    return rows


RUNNERS = {"evaluate": _run_evaluate, "coverage": _run_evaluate, "optimize": _run_optimize,
           "opc": _run_opc, "regret": _run_regret}


def run_seed(cfg: ExperimentConfig, seed: int) -> RunRecord:
    t0 = time.perf_counter()
    rows = RUNNERS[cfg.mode](cfg, seed)
    return RunRecord(cfg.hash(), seed, rows, time.perf_counter() - t0)


def run(cfg: ExperimentConfig, jobs: int = 1) -> list[RunRecord]:
    seeds = sorted(cfg.seeds)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(run_seed, [cfg] * len(seeds), seeds))
    else:
        records = [run_seed(cfg, s) for s in seeds]
    return sorted(records, key=lambda r: r.seed)


# -- aggregation and output ---------------------------------------------------------


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def records_csv(records: list[RunRecord]) -> str:
    rows = [row for rec in records for row in rec.rows]
    buf = io.StringIO()
    if rows:
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(list(rows[0].keys()))
        for row in rows:
            wr.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def summarize(cfg: ExperimentConfig, records: list[RunRecord]) -> dict:
    rows = [row for rec in records for row in rec.rows]
    out: dict = {"mode": cfg.mode, "num_seeds": len(records)}
    if cfg.mode in ("evaluate", "coverage"):
        per_n = {}
        for n in cfg.n:
            sel = [r for r in rows if r["n"] == n]
            per_n[str(n)] = {"mean_width": float(np.mean([r["width"] for r in sel])),
                             "coverage": float(np.mean([r["covered"] for r in sel]))}
        out["per_n"] = per_n
        if len(cfg.n) > 1:
            out["loglog_slope"] = loglog_slope(list(cfg.n), [per_n[str(n)]["mean_width"] for n in cfg.n])
    elif cfg.mode == "optimize":
        out["mean_avg_value"] = float(np.mean([r["avg_value"] for r in rows]))
        out["mean_best_arm_mass"] = float(np.mean([r["best_arm_mass"] for r in rows]))
    elif cfg.mode == "opc":
        names = sorted({r["quantity"] for r in rows})
        out["mean"] = {q: float(np.mean([r["value"] for r in rows if r["quantity"] == q])) for q in names}
    elif cfg.mode == "regret":
        out["all_within_bound"] = bool(all(r["within"] for r in rows))
        out["max_regret_over_bound"] = float(max(r["regret"] / r["bound"] for r in rows if r["bound"] > 0)) \
            if any(r["bound"] > 0 for r in rows) else 0.0
    return out


def write_outputs(cfg: ExperimentConfig, records: list[RunRecord], out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.mode}.csv"
    csv_path.write_text(records_csv(records))
    summary = {
        "config_hash": cfg.hash(),
        "version": __version__,
        "seeds": list(cfg.seeds),
        "summary": summarize(cfg, records),
        "wall_time": {str(r.seed): r.wall_time for r in records},
    }
    json_path = out_dir / "summary.json"
    json_path.write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    return csv_path, json_path


def _json_default(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(type(x))


def with_overrides(cfg: ExperimentConfig, mode: str | None = None, num_seeds: int | None = None,
                   out: str | None = None) -> ExperimentConfig:
    changes = {}
    if mode is not None:
        changes["mode"] = mode
    if num_seeds is not None:
        changes["seeds"] = tuple(range(num_seeds))
    if out is not None:
        changes["out"] = out
    return replace(cfg, **changes) if changes else cfg


__all__ = ["ExperimentConfig", "RunRecord", "ConfigError", "InfeasibleSetError", "load_config", "parse_config",
           "run", "run_seed", "write_outputs", "summarize", "records_csv", "with_overrides",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_INFEASIBLE"]
