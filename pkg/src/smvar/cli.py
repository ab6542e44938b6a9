"""Command line entry point: ``smvar constants|solve|sweep|verify``.

Exit codes: 0 success, 1 verification failure, 2 invalid model or config,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bounds import (NoCertifiedInterval, NotApplicable, TruncationSpec, interval_estimate,
                     sigma_search)
from .config import ConfigError, RunConfig, load_config
from .model import InvalidNonlinearity, check_hypotheses, compute_cf, weight_integrability
from .poisson import estimate_d_star, estimate_s_125
from .solvers import certify_nonexistence, solve_lambda, sweep
from .verify import run_battery

EXIT_OK, EXIT_VERIFY, EXIT_MODEL, EXIT_SOLVER = 0, 1, 2, 3

SWEEP_COLUMNS = ("lambda", "n_solutions", "min_energy", "mp_energy", "u_norms", "status")
PROFILE_COLUMNS = ("r", "u", "phi")

log = logging.getLogger("smvar")


class ModelError(ValueError):
    pass


def finite(obj):
    """Recursively replace non-finite floats by None so JSON never carries NaN/inf."""
    if isinstance(obj, dict):
        return {k: finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [finite(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(finite(data), indent=2, allow_nan=False) + "\n")


def _cell(x) -> str:
    return "" if x is None or not math.isfinite(x) else repr(float(x))


def constants_of(cfg: RunConfig) -> tuple[float, float]:
    c = cfg.constants
    d_star = c.d_star if c.d_star is not None else estimate_d_star()
    s_125 = c.s_125 if c.s_125 is not None else estimate_s_125()
    return d_star, s_125


def _require_hypotheses(cfg: RunConfig):
    try:
        report = check_hypotheses(cfg.nonlinearity())
    except InvalidNonlinearity as exc:
        raise ModelError(str(exc)) from exc
    if not report.ok:
        raise ModelError(f"hypotheses fail: {', '.join(report.failures())}")
    return report


def _truncation(cfg: RunConfig, prob, d_star: float, s_125: float) -> tuple[TruncationSpec | None, dict | None]:
    """u_sigma0 start profile: from the interval estimate when it applies, else sigma_search at s0 = 1."""
    try:
        est = interval_estimate(prob, d_star, s_125)
        if est.vacuous:
            return None, est.to_dict()
        ann = prob.weight.annulus
        return TruncationSpec(est.s0, est.sigma, ann.r_inner, ann.R_outer), est.to_dict()
    except (NotApplicable, NoCertifiedInterval):
        try:
            return sigma_search(prob.weight, prob.nonlinearity, 1.0), None
        except NoCertifiedInterval:
            return None, None


# -- subcommands ------------------------------------------------------------

def cmd_constants(cfg: RunConfig, args) -> int:
    f, a, e = cfg.nonlinearity(), cfg.weight(), cfg.problem.e
    try:
        report = check_hypotheses(f)
    except InvalidNonlinearity as exc:
        print(f"invalid nonlinearity: {exc}", file=sys.stderr)
        return EXIT_MODEL
    cf = compute_cf(f, e)
    sup = a.sup_norm
    threshold = 1.0 / (sup * cf) if sup * cf > 0 else math.inf
    d_star, s_125 = constants_of(cfg)
    out = {
        "c_f": cf, "n_f": report.n_f, "L_f": f.lipschitz, "threshold": threshold,
        "alpha_sup": sup,
        "hypotheses": {**asdict(report), "ok": report.ok, "failures": report.failures()},
        "weight_integrability": asdict(weight_integrability(a, cfg.grid())),
        "d_star": d_star, "s_125": s_125,
    }
    if report.ok:
        try:
            out["interval"] = interval_estimate(cfg.build_problem(0.0), d_star, s_125).to_dict()
        except (NotApplicable, NoCertifiedInterval) as exc:
            out["interval"] = {"not_applicable": str(exc)}
    text = json.dumps(finite(out), indent=2, allow_nan=False)
    print(text)
    if args.out and "json" in cfg.output.formats:
        (Path(args.out) / "constants.json").write_text(text + "\n")
    if not report.ok:
        print(f"hypotheses fail: {', '.join(report.failures())}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def cmd_solve(cfg: RunConfig, args) -> int:
    if cfg.problem.lam is None:
        raise ConfigError("solve needs problem.lambda")
    _require_hypotheses(cfg)
    prob = cfg.build_problem()
    d_star, s_125 = constants_of(cfg)
    trunc, est = _truncation(cfg, prob, d_star, s_125)
    settings = cfg.solver.settings()
    outcome = solve_lambda(prob, trunc, np.random.SeedSequence(cfg.solver.seed), settings)
    sols = ([outcome.trivial] if outcome.trivial is not None else []) + outcome.solutions
    out_dir = Path(args.out)
    formats = cfg.output.formats
    records = []
    for k, sol in enumerate(sols):
        name = f"profile_{k}_{sol.kind}.csv"
        if "csv" in formats:
            with open(out_dir / name, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(PROFILE_COLUMNS)
                for row in zip(sol.u.r, sol.u.values, sol.phi.values):
                    w.writerow([repr(float(x)) for x in row])
        records.append({**sol.summary(), "profile": name if "csv" in formats else None})
    result = {"lambda": prob.lam, "threshold": prob.threshold, "seed": cfg.solver.seed,
              "solutions": records, "failures": outcome.failures, "interval": est}
    if prob.lam < prob.threshold:
        result["nonexistence"] = certify_nonexistence(prob, outcome.starts, settings).to_dict()
    if "json" in formats:
        _write_json(out_dir / "solutions.json", result)
    for sol in outcome.solutions:
        log.info("%s: I = %.6g, ||u||_H1 = %.6g", sol.kind, sol.energy.i_lambda, sol.h1_norm)
    if outcome.failures:
        print("; ".join(outcome.failures), file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def sweep_lambdas(cfg: RunConfig, prob, d_star: float, s_125: float) -> tuple[list[float], dict | None]:
    """Explicit lambdas, else `points` log-spaced values in (threshold, factor * upper]."""
    p = cfg.problem
    if p.lambdas:
        return sorted(p.lambdas), None
    if p.window is None or p.window.points == 0:
        return [], None
    try:
        est = interval_estimate(prob, d_star, s_125)
    except (NotApplicable, NoCertifiedInterval) as exc:
        raise ConfigError(f"no lambda window available ({exc}); list problem.lambdas") from exc
    if est.vacuous:
        raise ConfigError("the interval estimate is vacuous; list problem.lambdas")
    grid = np.geomspace(est.threshold, p.window.factor * est.upper, p.window.points + 1)[1:]
    return [float(x) for x in grid], est.to_dict()


def cmd_sweep(cfg: RunConfig, args) -> int:
    _require_hypotheses(cfg)
    prob = cfg.build_problem(0.0)
    d_star, s_125 = constants_of(cfg)
    lambdas, est = sweep_lambdas(cfg, prob, d_star, s_125)
    trunc, _ = _truncation(cfg, prob, d_star, s_125) if lambdas else (None, None)
    records = sweep(prob, lambdas, trunc, seed=cfg.solver.seed, settings=cfg.solver.settings(),
                    jobs=args.jobs)
    out_dir = Path(args.out)
    if "csv" in cfg.output.formats:
        with open(out_dir / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_COLUMNS)
            for rec in records:
                w.writerow([repr(rec.lam), rec.n_solutions, _cell(rec.min_energy), _cell(rec.mp_energy),
                            ";".join(repr(float(x)) for x in rec.h1_norms),
                            "ok" if rec.error is None else f"error: {rec.error}"])
    if "json" in cfg.output.formats:
        _write_json(out_dir / "sweep.json", {"seed": cfg.solver.seed, "interval": est,
                                             "records": [asdict(r) for r in records]})
    if records and all(r.error is not None for r in records):
        print("every lambda failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    _require_hypotheses(cfg)
    prob = cfg.build_problem(0.0)
    d_star, s_125 = constants_of(cfg)
    checks = run_battery(prob, d_star, s_125, seed=cfg.solver.seed)
    passed = all(c.passed for c in checks)
    if "json" in cfg.output.formats:
        _write_json(Path(args.out) / "verify.json",
                    {"passed": passed, "checks": [c.to_dict() for c in checks]})
    for c in checks:
        log.info("%-22s %s value=%.3e tol=%.3e", c.name, "ok" if c.passed else "FAIL", c.value, c.tol)
    failing = [c.name for c in checks if not c.passed]
    if failing:
        print(f"verification failed: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"constants": cmd_constants, "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smvar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="YAML run configuration (defaults if omitted)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for the sweep")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_MODEL
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_MODEL
    if args.command != "constants" or args.out:
        args.out = args.out or cfg.output.directory
        Path(args.out).mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ModelError) as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
