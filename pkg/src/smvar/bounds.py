"""Truncation profiles u_sigma and the explicit constants M, N, t, a-bar.

Everything here is closed-form arithmetic except for ``interval_estimate``
(which also evaluates E1/E2 of the truncation profile by quadrature) and
the dense scan for max |F| on [-|s0|, |s0|].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .energy import Problem, energy
from .model import Nonlinearity, Weight, check_hypotheses, compute_cf
from .radial import RadialFunction, RadialGrid

SIGMA_MENU = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999)


class NotApplicable(ValueError):
    """The estimate's hypotheses do not hold for the given data."""


class NoCertifiedInterval(ValueError):
    pass


@dataclass(frozen=True)
class TruncationSpec:
    s0: float
    sigma: float
    r_inner: float
    R_outer: float

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not self.R_outer > self.r_inner >= 0:
            raise ValueError("need R_outer > r_inner >= 0")

    @property
    def plateau(self) -> tuple[float, float]:
        r, R = self.r_inner, self.R_outer
        return r, r + self.sigma * (R - r)

    @property
    def support(self) -> tuple[float, float]:
        r, R = self.r_inner, self.R_outer
        return max(r - (1 - self.sigma) * (R - r), 0.0), R


def truncation_values(spec: TruncationSpec, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    a, R = spec.support
    p0, p1 = spec.plateau
    if spec.r_inner == 0:
        up = np.ones_like(r)
    else:
        with np.errstate(over="ignore"):  # near-degenerate inner ramp
            up = np.clip((r - a) / (p0 - a), 0.0, 1.0)
    down = np.clip((R - r) / (R - p1), 0.0, 1.0)
    return spec.s0 * np.minimum(up, down)


def build_truncation(spec: TruncationSpec, grid: RadialGrid) -> RadialFunction:
    """Piecewise linear u_sigma: plateau s0 on the inner annulus, linear ramps to the support ends."""
    if spec.R_outer > grid.r_max:
        raise ValueError("annulus exceeds the truncated domain")
    vals = truncation_values(spec, grid.nodes)
    vals[-1] = 0.0
    return RadialFunction(grid, vals)


def h1_lower_bound(spec: TruncationSpec) -> float:
    """(4 pi s0^2 / 3) [(r + sigma (R - r))^3 - r^3]."""
    p0, p1 = spec.plateau
    return 4 * math.pi * spec.s0**2 / 3 * (p1**3 - p0**3)


def m_value(alpha0: float, alpha_sup: float, F_s0: float, F_max: float,
            sigma: float, R: float, r: float) -> float:
    """M(alpha0, s0, sigma, R, r) from its ingredients."""
    p1 = r + sigma * (R - r)
    a = max(r - (1 - sigma) * (R - r), 0.0)
    ramps = r**3 - a**3 + R**3 - p1**3
    return 4 * math.pi / 3 * (alpha0 * F_s0 * (p1**3 - r**3) - alpha_sup * F_max * ramps)


def max_abs_F(f: Nonlinearity, s0: float, n: int = 10_001) -> float:
    t = np.linspace(-abs(s0), abs(s0), n)
    return float(np.max(np.abs(f.F(t))))


def m_lower_bound(a: Weight, f: Nonlinearity, spec: TruncationSpec) -> float:
    ann = a.annulus
    return m_value(ann.alpha0, a.sup_norm, float(f.F(spec.s0)), max_abs_F(f, spec.s0),
                   spec.sigma, spec.R_outer, spec.r_inner)


def t_value(s0: float, sigma: float, R: float) -> float:
    return 4 * math.pi / 3 * R * s0**2 * (R**2 + (1 + sigma + sigma**2) / (1 - sigma))


def n_upper_bound(f: Nonlinearity, spec: TruncationSpec, e: float, d_star: float, s_125: float) -> float:
    """N = t/2 + pi e^2 d*^2 s_{12/5}^4 t^2, an upper bound for E1(u_sigma) when r_inner = 0."""
    if spec.r_inner != 0:
        raise NotApplicable("the N estimate assumes r_inner = 0")
    t = t_value(spec.s0, spec.sigma, spec.R_outer)
    return t / 2 + math.pi * e**2 * d_star**2 * s_125**4 * t**2


def sigma_search(a: Weight, f: Nonlinearity, s0: float, menu=SIGMA_MENU) -> TruncationSpec:
    """sigma from the fixed menu maximizing M, subject to M > 0."""
    if float(f.F(s0)) <= 0:
        raise NoCertifiedInterval("F(s0) must be positive")
    ann = a.annulus
    if ann.alpha0 <= 0:
        raise NoCertifiedInterval("the weight has no positive annulus bound")
    specs = [TruncationSpec(s0, sg, ann.r_inner, ann.R_outer) for sg in menu]
    ms = [m_lower_bound(a, f, sp) for sp in specs]
    k = int(np.argmax(ms))
    if ms[k] <= 0:
        raise NoCertifiedInterval("no sigma in the menu gives M > 0")
    return specs[k]


@dataclass(frozen=True)
class IntervalEstimate:
    threshold: float
    m_value: float
    n_value: float
    t_value: float
    upper: float
    upper_quadrature: float
    sigma: float
    s0: float
    e1_truncation: float
    e2_truncation: float
    abar: float | None = None

    @property
    def vacuous(self) -> bool:
        return not (np.isfinite(self.threshold) and self.upper > self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vacuous"] = self.vacuous
        return d


def _upper_for(a: Weight, f: Nonlinearity, spec: TruncationSpec, e: float, d_star: float,
               s_125: float) -> tuple[float, float, float]:
    m = m_lower_bound(a, f, spec)
    n = n_upper_bound(f, spec, e, d_star, s_125)
    return (4 * n / m if m > 0 else np.inf), m, n


def choose_s0(a: Weight, f: Nonlinearity, e: float, d_star: float, s_125: float,
              candidates: np.ndarray | None = None) -> TruncationSpec:
    """Plateau value and sigma giving the smallest upper end 4N/M.

    Any s0 with F(s0) > 0 and sigma with M > 0 yield a valid enclosure; this
    picks the tightest one over a log grid of s0 and the sigma menu.
    """
    if candidates is None:
        mags = np.logspace(-2, 3, 101)
        candidates = np.concatenate([mags, -mags])
    ann = a.annulus
    best, best_spec = np.inf, None
    for s0 in candidates:
        if float(f.F(s0)) <= 0:
            continue
        for sg in SIGMA_MENU:
            spec = TruncationSpec(float(s0), sg, ann.r_inner, ann.R_outer)
            up, m, _ = _upper_for(a, f, spec, e, d_star, s_125)
            if m > 0 and up < best:
                best, best_spec = up, spec
    if best_spec is None:
        raise NoCertifiedInterval("no (s0, sigma) gives M > 0")
    return best_spec


def interval_estimate(prob: Problem, d_star: float, s_125: float,
                      spec: TruncationSpec | None = None) -> IntervalEstimate:
    """Enclosure (threshold, 4N/M) of the multiplicity window, plus the sharper 4 E1/E2."""
    a, f, e = prob.weight, prob.nonlinearity, prob.e
    if a.is_zero:
        return IntervalEstimate(np.inf, 0.0, 0.0, 0.0, 0.0, 0.0, float("nan"), float("nan"), 0.0, 0.0)
    report = check_hypotheses(f)
    if not report.ok:
        raise NoCertifiedInterval(f"hypotheses fail: {', '.join(report.failures())}")
    if a.annulus.r_inner != 0:
        raise NotApplicable("the interval estimate assumes an annulus with r_inner = 0")
    threshold = 1.0 / (a.sup_norm * compute_cf(f, e))
    if spec is None:
        spec = choose_s0(a, f, e, d_star, s_125)
    upper, m, n = _upper_for(a, f, spec, e, d_star, s_125)
    u = build_truncation(spec, prob.grid)
    en = energy(u, prob)
    upper_q = 4 * en.e1 / en.potential if en.potential > 0 else np.inf
    return IntervalEstimate(
        threshold=threshold, m_value=m, n_value=n,
        t_value=t_value(spec.s0, spec.sigma, spec.R_outer), upper=upper,
        upper_quadrature=upper_q, sigma=spec.sigma, s0=spec.s0,
        e1_truncation=en.e1, e2_truncation=en.potential,
    )


@dataclass(frozen=True)
class AbarResult:
    value: float
    bounded: bool
    below_over_a: bool | None


def abar(rho0: float, e1_u: float, e2_u: float, sup_ratio: float) -> AbarResult:
    """a-bar = (1 + rho0) / (E2(u1)/E1(u1) - sup{E2 : E1 < rho0}/rho0).

    ``sup_ratio`` is the already divided sup-term.  When rho0 < 1 and the
    sup-term is below E2/(2 E1) the result is also checked against 4 E1/E2.
    """
    if rho0 <= 0:
        raise ValueError("rho0 must be positive")
    if not e1_u > rho0:
        raise NotApplicable("hypothesis (i) needs rho0 < E1(u1)")
    gap = e2_u / e1_u - sup_ratio
    if gap < 0:
        raise NotApplicable("hypothesis (ii) fails: sup-term exceeds E2/E1")
    if gap == 0:
        return AbarResult(np.inf, False, None)
    value = (1 + rho0) / gap
    below = None
    if rho0 < 1 and sup_ratio < e2_u / (2 * e1_u):
        below = value < 4 * e1_u / e2_u
    return AbarResult(value, bool(np.isfinite(value)), below)
