"""Command-line entry point: ``weakbellman {evaluate,optimize,opc,coverage,regret} --config PATH``."""

from __future__ import annotations

import argparse
import logging
import sys

from .conic import InfeasibleSetError
from .harness import (
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_OK,
    MODES,
    ConfigError,
    load_config,
    run,
    summarize,
    with_overrides,
    write_outputs,
)

log = logging.getLogger("weakbellman")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weakbellman", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", required=True, help="INI-style experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--seeds", type=int, default=None, help="use seeds 0..K-1")
        p.add_argument("--jobs", type=int, default=1, help="worker processes across seeds")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _print_table(summary: dict) -> None:
    for key, val in summary.items():
        if isinstance(val, dict):
            for sub, inner in val.items():
                print(f"{key}.{sub}\t{inner}")
        else:
            print(f"{key}\t{val}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = with_overrides(load_config(args.config), mode=args.mode, num_seeds=args.seeds, out=args.out)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = cfg.resolve(cfg.out) if args.out is None else args.out
    log.info("running %s on %d seeds (config %s)", cfg.mode, len(cfg.seeds), cfg.hash())
    try:
        records = run(cfg, jobs=args.jobs)
    except InfeasibleSetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    csv_path, json_path = write_outputs(cfg, records, out_dir)
    _print_table(summarize(cfg, records))
    log.info("wrote %s and %s", csv_path, json_path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
