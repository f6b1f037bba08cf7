"""Print the per-n mean width table and log-log slope from an evaluate run."""

import argparse
import csv
from collections import defaultdict

import numpy as np


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="evaluate.csv written by `weakbellman evaluate`")
    args = ap.parse_args()
    widths = defaultdict(list)
    with open(args.csv, newline="") as fh:
        for row in csv.DictReader(fh):
            widths[int(row["n"])].append(float(row["width"]))
    ns = sorted(widths)
    means = [float(np.mean(widths[n])) for n in ns]
    for n, w in zip(ns, means):
        print(f"{n:>8d}  {w:.5f}  ({len(widths[n])} seeds)")
    if len(ns) > 1:
        print(f"slope {np.polyfit(np.log(ns), np.log(means), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
