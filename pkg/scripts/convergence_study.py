#!/usr/bin/env python3
"""Grid refinement study: Poisson error and critical energies versus h.

Usage: python scripts/convergence_study.py [--lam 160] [--out results/convergence.csv]
"""

from __future__ import annotations

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from smvar.bounds import TruncationSpec, build_truncation
from smvar.energy import Problem
from smvar.model import Nonlinearity, Weight
from smvar.poisson import solve_phi
from smvar.radial import FOUR_PI, RadialFunction, RadialGrid
from smvar.solvers import minimize, mountain_pass


def ball_error(grid: RadialGrid) -> float:
    r = grid.nodes
    u = np.where(r < 1.0, 1.0, 0.0)
    u[np.argmin(np.abs(r - 1.0))] = math.sqrt(0.5)
    phi = solve_phi(RadialFunction(grid, u), 1.0).phi.values
    exact = np.where(r < 1.0, 2 * math.pi * (1 - r * r / 3), FOUR_PI / (3 * np.maximum(r, 1e-300)))
    return float(np.max(np.abs(phi - exact)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=160.0)
    ap.add_argument("--r-max", type=float, default=20.0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[501, 1001, 2001, 4001])
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    rows = []
    for n in args.sizes:
        grid = RadialGrid.uniform(args.r_max, n)
        prob = Problem(1.0, args.lam, Weight.constant_annulus(), Nonlinearity.min_abs_powers(), grid)
        well = minimize(prob, build_truncation(TruncationSpec(0.28184, 0.9, 0.0, 1.0), grid))
        mp = mountain_pass(prob, well)
        rows.append({"n": n, "h": grid.h, "ball_error": ball_error(grid),
                     "min_energy": well.energy.i_lambda, "mp_energy": mp.energy.i_lambda,
                     "mp_converged": mp.converged})
        print(f"n={n:5d} h={grid.h:.4f} ball={rows[-1]['ball_error']:.3e} "
              f"I_min={well.energy.i_lambda:.8f} I_mp={mp.energy.i_lambda:.8e}")

    # observed order from successive differences (three consecutive grids)
    for key in ("min_energy", "mp_energy"):
        v = [r[key] for r in rows]
        for a, b, c in zip(v, v[1:], v[2:]):
            if b != c and a != b:
                print(f"{key}: observed order {math.log2(abs((a - b) / (b - c))):.2f}")

    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
