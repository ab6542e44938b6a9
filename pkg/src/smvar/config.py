"""Run configuration: a YAML tree mapped onto frozen dataclasses.

Layout (every key optional, defaults shown by ``smvar.config.DEFAULT_YAML``)::

    problem:
      e: 1.0
      lambda: null            # single value, used by `solve`
      lambdas: []             # explicit list, used by `sweep`
      window: {points: 12, factor: 4.0}   # sweep grid when lambdas is empty; null disables
      nonlinearity: {kind: min-abs-powers, r: 0.5, p: 2.0}
      weight: {kind: constant-annulus, alpha0: 1.0, r_inner: 0.0, R_outer: 1.0, q: 0.5}
    discretization: {r_max: 20.0, n: 2001, quadrature: trapezoid}
    constants: {d_star: null, s_125: null}   # null = estimate
    solver: {tol: 1.0e-6, mp_tol: 1.0e-5, max_iter: 100000, mp_max_iter: 50000,
             path_nodes: 32, trivial_cutoff: 1.0e-4, distinct_cutoff: 1.0e-2, seed: 42}
    output: {directory: results, formats: [json, csv]}
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .energy import Problem
from .model import Nonlinearity, Weight
from .radial import RadialGrid
from .solvers import SolverSettings

SEED_ENV = "SMVAR_SEED"


class ConfigError(ValueError):
    pass


def _tuple(x) -> tuple:
    return tuple(float(v) for v in (x or ()))


def _freeze(d: dict) -> dict:
    # lists inside spec dicts become tuples so that equality is structural
    return {k: tuple(v) if isinstance(v, list) else v for k, v in dict(d).items()}


def _thaw(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass(frozen=True)
class Window:
    points: int = 12
    factor: float = 4.0


@dataclass(frozen=True)
class ProblemConfig:
    e: float = 1.0
    lam: float | None = None
    lambdas: tuple = ()
    window: Window | None = field(default_factory=Window)
    nonlinearity: dict = field(default_factory=lambda: {"kind": "min-abs-powers", "r": 0.5, "p": 2.0})
    weight: dict = field(default_factory=lambda: {"kind": "constant-annulus", "alpha0": 1.0,
                                                  "r_inner": 0.0, "R_outer": 1.0, "q": 0.5})


@dataclass(frozen=True)
class Discretization:
    r_max: float = 20.0
    n: int = 2001
    quadrature: str = "trapezoid"


@dataclass(frozen=True)
class Constants:
    d_star: float | None = None
    s_125: float | None = None


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    mp_tol: float = 1e-5
    max_iter: int = 100_000
    mp_max_iter: int = 50_000
    path_nodes: int = 32
    trivial_cutoff: float = 1e-4
    distinct_cutoff: float = 1e-2
    seed: int = 42

    def settings(self) -> SolverSettings:
        return SolverSettings(tol=self.tol, mp_tol=self.mp_tol, max_iter=self.max_iter,
                              mp_max_iter=self.mp_max_iter, path_nodes=self.path_nodes,
                              trivial_cutoff=self.trivial_cutoff,
                              distinct_cutoff=self.distinct_cutoff)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    formats: tuple = ("json", "csv")


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    discretization: Discretization = field(default_factory=Discretization)
    constants: Constants = field(default_factory=Constants)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- building blocks ---------------------------------------------------

    def nonlinearity(self) -> Nonlinearity:
        return Nonlinearity.from_dict(_thaw(self.problem.nonlinearity))

    def weight(self) -> Weight:
        return Weight.from_dict(_thaw(self.problem.weight))

    def grid(self) -> RadialGrid:
        d = self.discretization
        return RadialGrid.uniform(d.r_max, d.n, d.quadrature)

    def build_problem(self, lam: float | None = None) -> Problem:
        lam = self.problem.lam if lam is None else lam
        return Problem(self.problem.e, float(lam or 0.0), self.weight(), self.nonlinearity(), self.grid())

    def validate(self) -> "RunConfig":
        p, d, s = self.problem, self.discretization, self.solver
        if not p.e > 0:
            raise ConfigError("problem.e must be positive")
        if p.lam is not None and p.lam < 0:
            raise ConfigError("problem.lambda must be non-negative")
        if any(x < 0 for x in p.lambdas):
            raise ConfigError("problem.lambdas must be non-negative")
        if p.window is not None and (p.window.points < 0 or not p.window.factor > 0):
            raise ConfigError("problem.window needs points >= 0 and factor > 0")
        if d.n < 64:
            raise ConfigError("discretization.n must be at least 64")
        try:
            weight = self.weight()
            self.nonlinearity()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model: {exc}") from exc
        if not d.r_max > weight.annulus.R_outer:
            raise ConfigError("discretization.r_max must exceed the weight's R_outer")
        if d.quadrature not in ("trapezoid", "simpson"):
            raise ConfigError("discretization.quadrature must be trapezoid or simpson")
        for name in ("tol", "mp_tol", "trivial_cutoff", "distinct_cutoff"):
            if not getattr(s, name) > 0:
                raise ConfigError(f"solver.{name} must be positive")
        if s.max_iter < 1 or s.mp_max_iter < 1 or s.path_nodes < 3:
            raise ConfigError("solver iteration counts must be positive and path_nodes >= 3")
        fmts = self.output.formats
        if not fmts or not set(fmts) <= {"json", "csv"}:
            raise ConfigError("output.formats must be a non-empty subset of [json, csv]")
        for name in ("d_star", "s_125"):
            v = getattr(self.constants, name)
            if v is not None and not v > 0:
                raise ConfigError(f"constants.{name} must be positive")
        return self

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, solver=replace(self.solver, seed=int(seed)))

    # -- (de)serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        p = d["problem"]
        d["problem"] = {"e": p["e"], "lambda": p["lam"], "lambdas": list(p["lambdas"]),
                        "window": p["window"], "nonlinearity": _thaw(p["nonlinearity"]),
                        "weight": _thaw(p["weight"])}
        d["output"]["formats"] = list(d["output"]["formats"])
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = dict(d or {})
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        prob = dict(d.get("problem") or {})
        if "lambda" in prob:
            prob["lam"] = prob.pop("lambda")
        if prob.get("lam") is not None:
            prob["lam"] = float(prob["lam"])
        if "lambdas" in prob:
            prob["lambdas"] = _tuple(prob["lambdas"])
        if prob.get("window") is not None:
            prob["window"] = _section(Window, prob["window"])
        for key in ("nonlinearity", "weight"):
            if key in prob:
                prob[key] = _freeze(prob[key])
        out = dict(d.get("output") or {})
        if "formats" in out:
            out["formats"] = tuple(out["formats"])
        return cls(
            problem=_section(ProblemConfig, prob),
            discretization=_section(Discretization, d.get("discretization")),
            constants=_section(Constants, d.get("constants")),
            solver=_section(SolverConfig, d.get("solver")),
            output=_section(OutputConfig, out),
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(data)


_NUMERIC = {float: float, int: int}


def _section(cls, data):
    if data is None:
        return cls()
    if isinstance(data, cls):
        return data
    data = dict(data)
    names = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    out = {}
    for k, v in data.items():
        default = getattr(cls(), k)
        # YAML reads 1e-6 as a string; coerce scalars to the default's type
        if v is not None and type(default) in _NUMERIC and not isinstance(v, bool):
            try:
                v = _NUMERIC[type(default)](v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{cls.__name__}.{k}: {exc}") from exc
        elif v is not None and k in ("d_star", "s_125"):
            v = float(v)
        out[k] = v
    return cls(**out)


DEFAULT_YAML = RunConfig().to_yaml()


def load_config(path: str | os.PathLike | None, env=None) -> RunConfig:
    """Read, validate and apply the SMVAR_SEED override."""
    cfg = RunConfig() if path is None else RunConfig.from_yaml(Path(path).read_text())
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            cfg = cfg.with_seed(int(env[SEED_ENV]))
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    return cfg.validate()
