import json

import numpy as np
import pytest

from weakbellman import __version__
from weakbellman.cli import main
from weakbellman.features import FeatureMap, save_feature_csv
from weakbellman.harness import (
    ConfigError,
    derived_seed,
    load_config,
    parse_config,
    parse_seeds,
    records_csv,
    run,
    summarize,
    write_outputs,
)

BASE = """
[experiment]
mode = {mode}
seeds = {seeds}

[mdp]
source = gridworld

[policy]
target = tilt:0.8

[data]
behavior = target
n = {n}

[tests]
spec = identity

[radius]
delta = 0.1
"""


def _cfg(mode="evaluate", seeds="0-2", n="500"):
    return parse_config(BASE.format(mode=mode, seeds=seeds, n=n))


def test_parse_seeds():
    assert parse_seeds("0-3") == [0, 1, 2, 3]
    assert parse_seeds("5, 1, 3-4") == [1, 3, 4, 5]


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        _cfg(mode="plot")
    with pytest.raises(ConfigError):
        parse_config(BASE.format(mode="evaluate", seeds="", n="10"))
    with pytest.raises(ConfigError):
        parse_config("[mdp]\nsource = nowhere.mdp\n[experiment]\nmode = opc\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_identical_config_gives_identical_csv_bytes():
    cfg = _cfg()
    assert records_csv(run(cfg)) == records_csv(run(cfg))


def test_parallel_matches_serial():
    cfg = _cfg(seeds="0-3")
    assert records_csv(run(cfg, jobs=2)) == records_csv(run(cfg, jobs=1))


def test_evaluate_width_decreases_with_n():
    cfg = _cfg(seeds="0-4", n="500, 2000, 8000, 32000")
    summary = summarize(cfg, run(cfg))
    widths = [summary["per_n"][k]["mean_width"] for k in ("500", "2000", "8000", "32000")]
    assert all(b < a for a, b in zip(widths, widths[1:]))
    assert -0.65 <= summary["loglog_slope"] <= -0.35


def test_coverage_summary(tmp_path):
    cfg = _cfg(mode="coverage", seeds="0-19", n="2000")
    records = run(cfg)
    summary = summarize(cfg, records)
    assert summary["per_n"]["2000"]["coverage"] >= 0.9
    csv_path, json_path = write_outputs(cfg, records, tmp_path)
    payload = json.loads(json_path.read_text())
    assert payload["config_hash"] == cfg.hash() and payload["version"] == __version__
    assert csv_path.read_text().splitlines()[0].startswith("seed,n,rho,lambda,v_min,v_max")


def test_derived_seeds_differ():
    assert derived_seed(0, 0) != derived_seed(0, 1) != derived_seed(1, 0)


def _write(tmp_path, text):
    path = tmp_path / "cfg.ini"
    path.write_text(text)
    return str(path)


def test_cli_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, BASE.format(mode="evaluate", seeds="0", n="300"))
    assert main(["evaluate", "--config", good, "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "evaluate.csv").exists()
    assert main(["evaluate", "--config", str(tmp_path / "nope.ini")]) == 1
    save_feature_csv(FeatureMap(np.full((5, 2, 1), 0.9)), tmp_path / "const.csv")
    infeasible = _write(tmp_path, """
[experiment]
mode = evaluate
seeds = 0
[features]
source = const.csv
[policy]
target = tilt:0.8
[data]
behavior = tilt:0.1; tilt:0.9
n = 20000
[radius]
rho = 1e-6
[tests]
spec = indicators
""")
    assert main(["evaluate", "--config", infeasible, "--out", str(tmp_path / "inf")]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_cli_regret_and_opc_modes(tmp_path):
    cfg = _write(tmp_path, """
[experiment]
mode = regret
seeds = 0-2
[regret]
actions = 2, 8
[optimize]
T = 100, 400
[policy]
target = tilt:0.9
[data]
behavior = uniform; tilt:0.7
n = 2000
[tests]
spec = union(identity, indicators)
[opc]
sample_budget = 4
""")
    assert main(["regret", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())["summary"]
    assert summary["all_within_bound"]
    assert main(["opc", "--config", cfg, "--out", str(tmp_path / "o"), "--seeds", "1"]) == 0
    rows = (tmp_path / "o" / "opc.csv").read_text().splitlines()
    assert rows[0] == "seed,quantity,value" and any(",exact," in r for r in rows)
