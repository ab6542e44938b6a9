"""Invariant battery behind ``smvar verify``.

Each check returns a ``Check`` carrying the measured value and the
tolerance it was held to.  Tolerances that depend on the discretization
error are scaled by (h / H_REF)^2, so a coarse grid is held to a
proportionally looser bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf

from .bounds import (TruncationSpec, build_truncation, h1_lower_bound, m_lower_bound,
                     n_upper_bound)
from .energy import Problem, energy, energy_full, gradient_values, h1_norm, lemma33_probe, phi_of, random_profile
from .poisson import prop21_bounds_check, prop21_identity_residual, solve_phi
from .radial import RadialFunction

H_REF = 0.01


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def h2_scale(prob: Problem) -> float:
    return max(1.0, (prob.grid.h / H_REF) ** 2)


def _profiles(prob: Problem, n: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [random_profile(prob.grid, rng) for _ in range(n)]


def check_poisson_oracle(prob: Problem) -> Check:
    """phi for u = exp(-r^2/2) against e pi^{3/2} erf(r)/r, relative to max phi."""
    r = prob.grid.nodes
    u = RadialFunction(prob.grid, np.exp(-r * r / 2))
    phi = solve_phi(u, prob.e).phi.values
    exact = np.empty_like(r)
    exact[0] = 2 * math.pi * prob.e
    exact[1:] = prob.e * math.pi**1.5 * erf(r[1:]) / r[1:]
    err = float(np.max(np.abs(phi - exact)) / np.max(np.abs(exact)))
    tol = 1e-3 * h2_scale(prob)
    return Check("poisson_oracle", err, tol, err <= tol)


def check_identity(prob: Problem, n: int = 10, seed: int = 0) -> Check:
    worst = max(prop21_identity_residual(RadialFunction(prob.grid, v), prob.e)
                for v in _profiles(prob, n, seed))
    tol = 1e-3 * h2_scale(prob)
    return Check("identity_residual", worst, tol, worst <= tol, f"{n} random profiles")


def check_norm_bounds(prob: Problem, d_star: float, n: int = 10, seed: int = 1) -> Check:
    # near-sharp inequalities: exact on the reference grid, O(h^2) slack allowed when coarser
    scale = h2_scale(prob)
    tol = 1e-9 if scale == 1.0 else 1e-3 * scale
    reports = [prop21_bounds_check(RadialFunction(prob.grid, v), prob.e, d_star, tol=tol)
               for v in _profiles(prob, n, seed)]
    slack = min(min(rep.d12_slack / max(1.0, rep.d12_bound),
                    rep.interaction_slack / max(1.0, rep.interaction_bound)) for rep in reports)
    return Check("norm_bounds", slack, tol, all(rep.ok for rep in reports),
                 "smallest relative slack; must not be below -tol")


def check_energy_consistency(prob: Problem, n: int = 5, seed: int = 2) -> Check:
    worst = 0.0
    for v in _profiles(prob, n, seed):
        i = energy(v, prob).i_lambda
        j = energy_full(v, phi_of(v, prob), prob)
        worst = max(worst, abs(i - j) / max(1.0, abs(i)))
    return Check("energy_consistency", worst, 1e-10, worst <= 1e-10, "J(u, phi_u) = I(u)")


def check_gradient_fd(prob: Problem, n: int = 10, seed: int = 3, eps: float = 1e-5) -> Check:
    """Central differences of I along random v against <gradient, v>."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        u = random_profile(prob.grid, rng)
        v = random_profile(prob.grid, rng)
        p = prob.with_lambda(float(rng.uniform(0.5, 20.0)))
        fd = (energy(u + eps * v, p).i_lambda - energy(u - eps * v, p).i_lambda) / (2 * eps)
        an = float(np.dot(gradient_values(u, p), v))
        worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-12))
    return Check("gradient_fd", worst, 1e-5, worst <= 1e-5, f"{n} random (u, v, lambda)")


TRUNCATION_CASES = ((0.5, 0.5), (1.0, 0.5), (1.0, 0.9), (2.0, 0.7), (0.3, 0.95))


def check_truncation(prob: Problem, d_star: float, s_125: float, tol: float = 1e-3) -> list[Check]:
    """Quadrature values of u_sigma against the closed-form bounds on the weight's annulus."""
    ann = prob.weight.annulus
    f = prob.nonlinearity
    h1_gap, m_gap, n_gap = -np.inf, -np.inf, -np.inf
    for s0, sigma in TRUNCATION_CASES:
        if float(f.F(s0)) <= 0:
            continue
        spec = TruncationSpec(s0, sigma, ann.r_inner, ann.R_outer)
        u = build_truncation(spec, prob.grid)
        en = energy(u, prob)
        lower = h1_lower_bound(spec)
        h1_gap = max(h1_gap, (lower - h1_norm(u, prob) ** 2) / max(1.0, lower))
        m = m_lower_bound(prob.weight, f, spec)
        m_gap = max(m_gap, (m - en.potential) / max(1.0, abs(m)))
        if ann.r_inner == 0:
            n = n_upper_bound(f, spec, prob.e, d_star, s_125)
            n_gap = max(n_gap, (en.e1 - n) / max(1.0, n))
    checks = [Check("truncation_h1_lower", float(h1_gap), tol, h1_gap <= tol),
              Check("truncation_m_lower", float(m_gap), tol, m_gap <= tol)]
    if np.isfinite(n_gap):
        checks.append(Check("truncation_n_upper", float(n_gap), tol, n_gap <= tol))
    return checks


def check_lemma33(prob: Problem, seed: int = 0) -> Check:
    probe = lemma33_probe(prob, seed=seed)
    ratios = np.asarray(probe.ratios)
    gap = float(np.max(np.diff(ratios)))  # must be < 0
    return Check("lemma33_probe", gap, 0.0, probe.strictly_decreasing,
                 "largest step of the sampled ratio as rho decreases")


def run_battery(prob: Problem, d_star: float, s_125: float, seed: int = 0) -> list[Check]:
    return [
        check_poisson_oracle(prob),
        check_identity(prob, seed=seed),
        check_norm_bounds(prob, d_star, seed=seed + 1),
        check_energy_consistency(prob, seed=seed + 2),
        check_gradient_fd(prob, seed=seed + 3),
        *check_truncation(prob, d_star, s_125),
        check_lemma33(prob, seed=seed),
    ]
