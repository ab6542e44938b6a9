#!/usr/bin/env python3
"""Run a lambda sweep from a config file and print a solution-count table.

Usage: python scripts/run_sweep.py configs/default.yaml [--jobs 2] [--out results/sweep]
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from smvar.cli import main as smvar_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()
    code = smvar_main(["sweep", "--config", args.config, "--jobs", str(args.jobs), "--out", args.out])
    path = Path(args.out) / "sweep.csv"
    if not path.exists():
        return code
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'lambda':>12} {'#sol':>4} {'I_min':>14} {'I_mp':>14}  status")
    def cell(x: str) -> str:
        return f"{float(x):14.6e}" if x else f"{'-':>14}"

    for r in rows:
        print(f"{float(r['lambda']):12.5g} {r['n_solutions']:>4} {cell(r['min_energy'])} "
              f"{cell(r['mp_energy'])}  {r['status']}")
    return code


if __name__ == "__main__":
    sys.exit(main())
