"""Nonlinearities f, weights alpha, the constant c_f and growth envelopes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .radial import RadialGrid

SQRT_PI = math.sqrt(math.pi)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

NONLINEARITY_KINDS = ("min-abs-powers", "min-plus-powers", "log-square", "custom-table", "callable")
WEIGHT_KINDS = ("constant-annulus", "gaussian", "power-decay", "custom-table")


class InvalidNonlinearity(ValueError):
    pass


def _min_power_primitive(a: np.ndarray, r: float, p: float) -> np.ndarray:
    # primitive of min(a^r, a^p) on a >= 0; the two powers cross at a = 1
    lo = a ** (p + 1) / (p + 1)
    hi = 1.0 / (p + 1) + (a ** (r + 1) - 1.0) / (r + 1)
    return np.where(a <= 1.0, lo, hi)


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A continuous f with f(0) = 0 together with its primitive F.

    ``params`` holds the exponents ``r`` and ``p`` for the power kinds, the
    table ``s`` and ``f`` arrays for ``custom-table`` and ``f``/``F``
    callables for ``callable``.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in NONLINEARITY_KINDS:
            raise InvalidNonlinearity(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind in ("min-abs-powers", "min-plus-powers"):
            r, p = float(self.params["r"]), float(self.params["p"])
            if not 0 < r < 1 < p:
                raise InvalidNonlinearity("need 0 < r < 1 < p")
        elif self.kind == "custom-table":
            s = np.asarray(self.params["s"], dtype=float)
            fv = np.asarray(self.params["f"], dtype=float)
            if s.shape != fv.shape or s.size < 2 or not np.all(np.diff(s) > 0):
                raise InvalidNonlinearity("table needs >= 2 strictly increasing abscissae")
            if not np.all(np.isfinite(fv)):
                raise InvalidNonlinearity("table has non-finite values")
            if not s[0] <= 0.0 <= s[-1]:
                raise InvalidNonlinearity("table must bracket s = 0")
            # cumulative exact integral of the piecewise linear interpolant
            cum = np.concatenate([[0.0], np.cumsum(np.diff(s) * (fv[1:] + fv[:-1]) / 2)])
            cum -= self._table_primitive_raw(np.array([0.0]), s, fv, cum)[0]
            object.__setattr__(self, "_table", (s, fv, cum))
        elif self.kind == "callable":
            if not callable(self.params.get("f")):
                raise InvalidNonlinearity("callable kind needs params['f']")

    # -- constructors -------------------------------------------------------
    @classmethod
    def min_abs_powers(cls, r: float = 0.5, p: float = 2.0) -> "Nonlinearity":
        return cls("min-abs-powers", {"r": r, "p": p})

    @classmethod
    def min_plus_powers(cls, r: float = 0.5, p: float = 2.0) -> "Nonlinearity":
        return cls("min-plus-powers", {"r": r, "p": p})

    @classmethod
    def log_square(cls) -> "Nonlinearity":
        return cls("log-square")

    @classmethod
    def table(cls, s, f) -> "Nonlinearity":
        return cls("custom-table", {"s": list(map(float, s)), "f": list(map(float, f))})

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls.table([-1.0, 1.0], [0.0, 0.0])

    @classmethod
    def from_callable(cls, f: Callable, F: Callable | None = None, lipschitz: float | None = None):
        return cls("callable", {"f": f, "F": F, "lipschitz": lipschitz})

    # -- evaluation ---------------------------------------------------------
    def f(self, s):
        s = np.asarray(s, dtype=float)
        k = self.kind
        if k == "min-abs-powers":
            a = np.abs(s)
            return np.minimum(a ** self.params["r"], a ** self.params["p"])
        if k == "min-plus-powers":
            a = np.maximum(s, 0.0)
            return np.minimum(a ** self.params["r"], a ** self.params["p"])
        if k == "log-square":
            return np.log1p(s * s)
        if k == "custom-table":
            ts, tf, _ = self._table
            return np.interp(s, ts, tf)
        return np.asarray(self.params["f"](s), dtype=float)

    def F(self, s):
        s = np.asarray(s, dtype=float)
        k = self.kind
        if k == "min-abs-powers":
            return np.sign(s) * _min_power_primitive(np.abs(s), self.params["r"], self.params["p"])
        if k == "min-plus-powers":
            return _min_power_primitive(np.maximum(s, 0.0), self.params["r"], self.params["p"])
        if k == "log-square":
            return s * np.log1p(s * s) - 2.0 * s + 2.0 * np.arctan(s)
        if k == "custom-table":
            ts, tf, cum = self._table
            return self._table_primitive_raw(s, ts, tf, cum)
        if self.params.get("F") is not None:
            return np.asarray(self.params["F"](s), dtype=float)
        return _cumulative_primitive(self.f, s)

    @staticmethod
    def _table_primitive_raw(s, ts, tf, cum):
        # np.interp clamps, so f is constant outside the table
        sc = np.clip(s, ts[0], ts[-1])
        i = np.clip(np.searchsorted(ts, sc, side="right") - 1, 0, ts.size - 2)
        ds = sc - ts[i]
        slope = (tf[i + 1] - tf[i]) / (ts[i + 1] - ts[i])
        inner = cum[i] + tf[i] * ds + 0.5 * slope * ds**2
        return inner + tf[0] * np.minimum(s - ts[0], 0.0) + tf[-1] * np.maximum(s - ts[-1], 0.0)

    @property
    def lipschitz(self) -> float | None:
        """Global Lipschitz constant when known in closed form."""
        k = self.kind
        if k in ("min-abs-powers", "min-plus-powers"):
            return float(self.params["p"])
        if k == "log-square":
            return 1.0
        if k == "custom-table":
            ts, tf, _ = self._table
            return float(np.max(np.abs(np.diff(tf) / np.diff(ts))))
        return self.params.get("lipschitz")

    def linear_bound(self, sampling: "Sampling | None" = None) -> float:
        """Sampled n_f = sup |f(s)|/|s|."""
        s = (sampling or Sampling()).points()
        return float(np.max(np.abs(self.f(s)) / np.abs(s)))

    def to_dict(self) -> dict:
        if self.kind == "callable":
            raise TypeError("callable nonlinearities are not serializable")
        return {"kind": self.kind, **{k: v for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "Nonlinearity":
        d = dict(d)
        kind = d.pop("kind")
        return cls(kind, d)


def _cumulative_primitive(f: Callable, s: np.ndarray, n: int = 4001) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    smax = max(float(np.max(np.abs(s))), 1e-12)
    t = np.linspace(-smax, smax, n)
    ft = np.asarray(f(t), dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(np.diff(t) * (ft[1:] + ft[:-1]) / 2)])
    cum -= np.interp(0.0, t, cum)
    return np.interp(s, t, cum)


@dataclass(frozen=True)
class Sampling:
    """Symmetric log-spaced sampling of |s| in [s_min, s_max]."""

    s_min: float = 1e-6
    s_max: float = 1e8
    per_decade: int = 200

    def magnitudes(self) -> np.ndarray:
        decades = math.log10(self.s_max / self.s_min)
        return np.logspace(math.log10(self.s_min), math.log10(self.s_max),
                           int(decades * self.per_decade) + 1)

    def points(self) -> np.ndarray:
        a = self.magnitudes()
        return np.concatenate([-a[::-1], a])


@dataclass(frozen=True)
class HypothesisReport:
    f1_ok: bool
    f2_ok: bool
    f3_ok: bool
    s0: float
    F_s0: float
    tail_ratio: float
    origin_ratio: float
    n_f: float

    @property
    def ok(self) -> bool:
        return self.f1_ok and self.f2_ok and self.f3_ok

    def failures(self) -> list[str]:
        return [name for name, ok in (("f1", self.f1_ok), ("f2", self.f2_ok), ("f3", self.f3_ok)) if not ok]


def check_hypotheses(f: Nonlinearity, sampling: Sampling | None = None,
                     tol_f1: float = 1e-3, tol_f2: float = 1e-3) -> HypothesisReport:
    """Sampled check of sublinearity at infinity, superlinearity at 0 and F(s0) > 0."""
    sampling = sampling or Sampling()
    if sampling.s_max < 1e3:
        raise ValueError("sampling must reach |s| >= 1e3")
    s = sampling.points()
    fs = f.f(s)
    Fs = f.F(s)
    if not (np.all(np.isfinite(fs)) and np.all(np.isfinite(Fs))):
        raise InvalidNonlinearity("non-finite sample of f or F")
    ratio = np.abs(fs) / np.abs(s)
    tail = float(max(ratio[0], ratio[-1]))
    mid = s.size // 2
    origin = float(max(ratio[mid - 1], ratio[mid]))
    k = int(np.argmax(Fs))
    return HypothesisReport(
        f1_ok=tail < tol_f1,
        f2_ok=origin < tol_f2,
        f3_ok=bool(Fs[k] > 0),
        s0=float(s[k]),
        F_s0=float(Fs[k]),
        tail_ratio=tail,
        origin_ratio=origin,
        n_f=float(ratio.max()),
    )


def _cf_ratio(f: Nonlinearity, s: np.ndarray, e: float) -> np.ndarray:
    a = np.abs(s)
    return np.abs(f.f(s)) / (a + 4.0 * SQRT_PI * e * a * a)


def golden_max(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-12) -> tuple[float, float]:
    """Golden-section search for a maximum of a unimodal fn on [a, b]."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > tol * max(abs(a) + abs(b), 1.0):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    x = (a + b) / 2
    return x, fn(x)


def _sup_both_signs(ratio: Callable[[np.ndarray], np.ndarray], mags: np.ndarray) -> float:
    """Max of ratio(s) over s = +-mags, refined by golden section in log|s|."""
    best = -np.inf
    for sign in (1.0, -1.0):
        vals = ratio(sign * mags)
        if not np.all(np.isfinite(vals)):
            raise InvalidNonlinearity("sampled ratio is not finite")
        k = int(np.argmax(vals))
        best = max(best, float(vals[k]))
        lo, hi = mags[max(k - 1, 0)], mags[min(k + 1, mags.size - 1)]
        _, refined = golden_max(lambda x: float(ratio(np.array(sign * math.exp(x)))),
                                math.log(lo), math.log(hi))
        best = max(best, refined)
    return best


def compute_cf(f: Nonlinearity, e: float, s_range: tuple[float, float] = (1e-6, 1e6),
               n_scan: int = 4001) -> float:
    """c_f = max_{s != 0} |f(s)| / (|s| + 4 sqrt(pi) e s^2).

    Coarse log-grid scan on both signs, then golden-section refinement in
    log|s| on the bracket around the best sample.
    """
    if e <= 0:
        raise ValueError("coupling e must be positive")
    mags = np.logspace(math.log10(s_range[0]), math.log10(s_range[1]), n_scan)
    return _sup_both_signs(lambda s: _cf_ratio(f, s, e), mags)


def _envelope_mags(sampling: Sampling | None) -> np.ndarray:
    return (sampling or Sampling(s_min=1e-6, s_max=1e6, per_decade=400)).magnitudes()


def envelope_check_quadratic(f: Nonlinearity, eps: float, sampling: Sampling | None = None) -> float:
    """Smallest c with |f(s)| <= eps|s| + c s^2 on the sampled range."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    need = _sup_both_signs(lambda s: (np.abs(f.f(s)) - eps * np.abs(s)) / (s * s),
                           _envelope_mags(sampling))
    return max(0.0, need)


def envelope_check_subcritical(f: Nonlinearity, eps: float, q: float,
                               sampling: Sampling | None = None) -> float:
    """Smallest M with |f(s)| <= eps|s| + M|s|^q on the sampled range.

    The sampling covers the band near 0 and near infinity where
    |f(s)| < eps|s| already holds (M is not needed there) as well as the
    middle band that actually fixes M.
    """
    if eps <= 0 or not 0 < q < 1:
        raise ValueError("need eps > 0 and q in (0, 1)")
    need = _sup_both_signs(lambda s: (np.abs(f.f(s)) - eps * np.abs(s)) / np.abs(s) ** q,
                           _envelope_mags(sampling))
    return max(0.0, need)


# -- weights --------------------------------------------------------------

@dataclass(frozen=True)
class Annulus:
    r_inner: float
    R_outer: float
    alpha0: float

    def __post_init__(self):
        if not self.R_outer > self.r_inner >= 0:
            raise ValueError("need R_outer > r_inner >= 0")
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be non-negative")


@dataclass(frozen=True, eq=False)
class Weight:
    """Radial weight alpha(r) >= 0 with its annulus lower bound data.

    Kinds: ``constant-annulus`` (alpha0 on [r_inner, R_outer], 0 outside),
    ``gaussian`` exp(-r^2), ``power-decay`` (1+r)^-beta, ``custom-table``
    (linear interpolation, 0 beyond the table).
    """

    kind: str
    q: float = 0.5
    params: dict = field(default_factory=dict)
    annulus: Annulus | None = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        if self.kind == "constant-annulus":
            ann = Annulus(float(self.params["r_inner"]), float(self.params["R_outer"]),
                          float(self.params["alpha0"]))
            object.__setattr__(self, "annulus", ann)
        elif self.kind == "custom-table":
            r = np.asarray(self.params["r"], dtype=float)
            a = np.asarray(self.params["alpha"], dtype=float)
            if r.shape != a.shape or r.size < 2 or not np.all(np.diff(r) > 0) or r[0] < 0:
                raise ValueError("weight table needs increasing radii >= 0")
            if np.any(a < 0):
                raise ValueError("weight must be non-negative")
        if self.annulus is None:
            R = 1.0
            object.__setattr__(self, "annulus", Annulus(0.0, R, float(np.min(self(np.linspace(0, R, 257))))))
        ann = self.annulus
        probe = np.linspace(ann.r_inner, ann.R_outer, 1025)
        if np.any(self(probe) < ann.alpha0 * (1 - 1e-12)):
            raise ValueError("alpha0 exceeds alpha somewhere on the annulus")

    @classmethod
    def constant_annulus(cls, alpha0: float = 1.0, r_inner: float = 0.0, R_outer: float = 1.0,
                         q: float = 0.5) -> "Weight":
        return cls("constant-annulus", q, {"alpha0": alpha0, "r_inner": r_inner, "R_outer": R_outer})

    @classmethod
    def gaussian(cls, q: float = 0.5, annulus: Annulus | None = None) -> "Weight":
        return cls("gaussian", q, {}, annulus)

    @classmethod
    def power_decay(cls, beta: float, q: float = 0.5, annulus: Annulus | None = None) -> "Weight":
        return cls("power-decay", q, {"beta": beta}, annulus)

    @classmethod
    def zero(cls, q: float = 0.5) -> "Weight":
        return cls.constant_annulus(0.0, 0.0, 1.0, q)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        k = self.kind
        if k == "constant-annulus":
            a = self.params
            inside = (r >= a["r_inner"]) & (r <= a["R_outer"])
            return np.where(inside, float(a["alpha0"]), 0.0)
        if k == "gaussian":
            return np.exp(-r * r)
        if k == "power-decay":
            return (1.0 + r) ** (-float(self.params["beta"]))
        tr, ta = np.asarray(self.params["r"], float), np.asarray(self.params["alpha"], float)
        return np.interp(r, tr, ta, right=0.0)

    def jumps(self) -> list[float]:
        if self.kind == "constant-annulus":
            a = self.params
            return [x for x in (a["r_inner"], a["R_outer"]) if x > 0]
        return []

    def sample(self, grid: RadialGrid) -> np.ndarray:
        """Node values for quadrature.

        A node sitting exactly on a jump of alpha takes the mean of the one
        sided limits, which keeps the trapezoid rule second order.
        """
        vals = self(grid.nodes).astype(float)
        for x in self.jumps():
            i = int(np.argmin(np.abs(grid.nodes - x)))
            if abs(grid.nodes[i] - x) <= 1e-12 * max(1.0, x):
                h = 1e-9 * max(1.0, x)
                vals[i] = 0.5 * (float(self(x - h)) + float(self(x + h)))
        return vals

    @property
    def sup_norm(self) -> float:
        k = self.kind
        if k == "constant-annulus":
            return float(self.params["alpha0"])
        if k in ("gaussian", "power-decay"):
            return 1.0
        return float(np.max(self.params["alpha"]))

    @property
    def is_zero(self) -> bool:
        return self.sup_norm == 0.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "q": self.q, **self.params}
        if self.kind != "constant-annulus":
            ann = self.annulus
            d["annulus"] = {"r_inner": ann.r_inner, "R_outer": ann.R_outer, "alpha0": ann.alpha0}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Weight":
        d = dict(d)
        kind = d.pop("kind")
        q = float(d.pop("q", 0.5))
        ann = d.pop("annulus", None)
        return cls(kind, q, d, Annulus(**ann) if ann else None)


@dataclass(frozen=True)
class WeightNorm:
    value: float
    value_doubled: float
    diverges: bool


def _tail_extrapolated(weighted: np.ndarray, grid: RadialGrid) -> float:
    """Integral over [0, inf) assuming a power-law tail beyond r_max.

    The local decay exponent k of the integrand at r_max gives the tail
    w(R) R / (k - 1); k <= 1 means the integral diverges (inf).
    """
    r = grid.nodes
    total = float(np.sum(np.diff(r) * (weighted[1:] + weighted[:-1]) / 2))
    w1, w0 = weighted[-1], weighted[-2]
    if w1 <= 1e-14 * max(total, 1e-300):
        return total
    if w0 <= 0:
        return np.inf
    k = -math.log(w1 / w0) / math.log(r[-1] / r[-2])
    if k <= 1.0:
        return np.inf
    return total + float(w1 * r[-1] / (k - 1.0))


def weight_integrability(a: Weight, grid: RadialGrid, rel_tol: float = 0.01) -> WeightNorm:
    """||alpha||_{6/(5-q)} with a divergence flag from an r_max doubling test."""
    p = 6.0 / (5.0 - a.q)

    def norm_on(g: RadialGrid) -> float:
        if a.kind == "constant-annulus":
            ann = a.params
            hi, lo = min(ann["R_outer"], g.r_max), min(ann["r_inner"], g.r_max)
            return float(ann["alpha0"]) * (4 * math.pi / 3 * (hi**3 - lo**3)) ** (1 / p)
        vals = a.sample(g) ** p
        total = _tail_extrapolated(4 * np.pi * g.nodes**2 * vals, g)
        return total ** (1 / p)

    doubled = RadialGrid(np.concatenate([grid.nodes, grid.nodes[1:] + grid.r_max]), grid.quadrature)
    v1, v2 = norm_on(grid), norm_on(doubled)
    if v1 == 0.0 and v2 == 0.0:
        return WeightNorm(0.0, 0.0, False)
    diverges = not (np.isfinite(v1) and np.isfinite(v2)) or abs(v2 - v1) > rel_tol * abs(v1)
    return WeightNorm(float(v1), float(v2), bool(diverges))
