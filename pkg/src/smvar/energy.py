"""Energies I_lambda = E1 - lambda E2, J_lambda, their discrete gradient and residual.

Discretization (all on the node values u_0..u_{n-1}, u_{n-1} = 0):

* Dirichlet term: exact energy of the piecewise linear interpolant,
  1/2 sum_i c_i (u_{i+1} - u_i)^2 with c_i = 4 pi (r_{i+1}^3 - r_i^3) / (3 h_i^2).
* mass, coupling and potential terms: grid quadrature with weights 4 pi w_i r_i^2.
* phi_u from the symmetric Newton kernel in ``poisson``.

The gradient is the exact derivative of this discrete energy, so it is
consistent with it to round-off.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

from .model import Nonlinearity, Weight
from .poisson import harmonic_d12_sq, newton_potential
from .radial import FOUR_PI, RadialFunction, RadialGrid


@dataclass(frozen=True, eq=False)
class Problem:
    e: float
    lam: float
    weight: Weight
    nonlinearity: Nonlinearity
    grid: RadialGrid

    def __post_init__(self):
        if self.e <= 0:
            raise ValueError("coupling e must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    def with_lambda(self, lam: float) -> "Problem":
        return Problem(self.e, lam, self.weight, self.nonlinearity, self.grid)

    def with_grid(self, grid: RadialGrid) -> "Problem":
        return Problem(self.e, self.lam, self.weight, self.nonlinearity, grid)

    @cached_property
    def vol(self) -> np.ndarray:
        return self.grid.volume_weights

    @cached_property
    def alpha(self) -> np.ndarray:
        return self.weight.sample(self.grid)

    @cached_property
    def stiffness(self) -> np.ndarray:
        r = self.grid.nodes
        h = np.diff(r)
        return FOUR_PI * (r[1:] ** 3 - r[:-1] ** 3) / (3.0 * h * h)

    @property
    def threshold(self) -> float:
        """Non-existence bound 1/(||alpha||_inf c_f), +inf for alpha = 0."""
        from .model import compute_cf
        sup = self.weight.sup_norm
        if sup == 0:
            return np.inf
        return 1.0 / (sup * compute_cf(self.nonlinearity, self.e))


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    mass: float
    coupling: float
    potential: float
    lam: float

    @property
    def e1(self) -> float:
        return self.dirichlet + self.mass + self.coupling

    @property
    def i_lambda(self) -> float:
        return self.e1 - self.lam * self.potential

    def to_dict(self) -> dict:
        return {"dirichlet": self.dirichlet, "mass": self.mass, "coupling": self.coupling,
                "potential": self.potential, "e1": self.e1, "i_lambda": self.i_lambda}


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, RadialFunction) else np.asarray(u, dtype=float)


def dirichlet_energy(v: np.ndarray, prob: Problem) -> float:
    return 0.5 * float(np.dot(prob.stiffness, np.diff(v) ** 2))


def h1_norm(u, prob: Problem) -> float:
    """Discrete H^1 norm consistent with the energy (sqrt of 2*(dirichlet + mass))."""
    v = _values(u)
    return float(np.sqrt(2.0 * dirichlet_energy(v, prob) + np.dot(prob.vol, v * v)))


def h1_distance(u, v, prob: Problem) -> float:
    return h1_norm(_values(u) - _values(v), prob)


def phi_of(v: np.ndarray, prob: Problem) -> np.ndarray:
    return prob.e * newton_potential(v * v, prob.grid)


def energy(u, prob: Problem, phi: np.ndarray | None = None) -> EnergyBreakdown:
    v = _values(u)
    if phi is None:
        phi = phi_of(v, prob)
    vol = prob.vol
    return EnergyBreakdown(
        dirichlet=dirichlet_energy(v, prob),
        mass=0.5 * float(np.dot(vol, v * v)),
        coupling=0.25 * prob.e * float(np.dot(vol, phi * v * v)),
        potential=float(np.dot(vol, prob.alpha * prob.nonlinearity.F(v))),
        lam=prob.lam,
    )


def energy_full(u, phi, prob: Problem) -> float:
    """J_lambda(u, phi) for an arbitrary potential phi.

    The phi Dirichlet term is the exact energy of phi's 1/r-linear
    interpolant continued by its monopole tail, so J(u, phi_u) = I(u).
    """
    v, p = _values(u), _values(phi)
    vol = prob.vol
    return (dirichlet_energy(v, prob) + 0.5 * float(np.dot(vol, v * v))
            + 0.5 * prob.e * float(np.dot(vol, p * v * v))
            - harmonic_d12_sq(p, prob.grid) / (16.0 * np.pi)
            - prob.lam * float(np.dot(vol, prob.alpha * prob.nonlinearity.F(v))))


def _coupling_sign() -> float:
    # mutation hook for the verification battery
    return -1.0 if os.environ.get("SMVAR_INJECT_FAULT") == "coupling-sign" else 1.0


def gradient_values(v: np.ndarray, prob: Problem, phi: np.ndarray | None = None) -> np.ndarray:
    if phi is None:
        phi = phi_of(v, prob)
    c = prob.stiffness
    du = np.diff(v)
    g = np.zeros_like(v)
    g[:-1] -= c * du
    g[1:] += c * du
    g += prob.vol * (v + _coupling_sign() * prob.e * phi * v
                     - prob.lam * prob.alpha * prob.nonlinearity.f(v))
    g[-1] = 0.0  # Dirichlet node is not a degree of freedom
    return g


def gradient(u: RadialFunction, prob: Problem) -> RadialFunction:
    """Nodal gradient g with <g, v> = dI/du[v] for test vectors v vanishing at r_max.

    Equals the weak form int(grad u.grad v + u v + e phi_u u v) - lambda int alpha f(u) v
    with the discrete quadrature; no derivative of f is needed.
    """
    return u.with_values(gradient_values(u.values, prob))


def _banded(prob: Problem, diag_extra: np.ndarray | None = None) -> np.ndarray:
    c = prob.stiffness
    n = prob.grid.n - 1  # free nodes 0..n-2
    diag = prob.vol[:n].copy()
    if diag_extra is not None:
        diag += diag_extra[:n]
    diag[:-1] += c[:n - 1]
    diag[1:] += c[:n - 1]
    diag[-1] += c[n - 1]
    ab = np.zeros((3, n))
    ab[0, 1:] = -c[:n - 1]
    ab[1] = diag
    ab[2, :-1] = -c[:n - 1]
    return ab


def riesz(g: np.ndarray, prob: Problem, potential: np.ndarray | None = None) -> np.ndarray:
    """Solve (S + M (1 + potential)) w = g on the free nodes, w = 0 at r_max.

    With potential = None this is the discrete (-Laplace + 1) operator, i.e.
    the H^1 Riesz map; passing e*phi_u gives the preconditioner used by the solvers.
    """
    extra = None if potential is None else prob.vol * potential
    w = np.zeros_like(g)
    w[:-1] = solve_banded((1, 1), _banded(prob, extra), g[:-1])
    return w


def residual_norm(u, prob: Problem) -> float:
    """Discrete H^{-1} norm of the gradient: sqrt(<g, (-Laplace_h + 1)^{-1} g>)."""
    g = gradient_values(_values(u), prob)
    return float(np.sqrt(max(np.dot(g, riesz(g, prob)), 0.0)))


# -- probes ---------------------------------------------------------------

def random_profile(grid: RadialGrid, rng: np.random.Generator, support: float | None = None) -> np.ndarray:
    """Smooth random radial profile: a few Gaussian bumps plus a random sign pattern."""
    support = support if support is not None else min(3.0, grid.r_max / 2)
    r = grid.nodes
    v = np.zeros_like(r)
    for _ in range(rng.integers(1, 4)):
        c = rng.uniform(0, support)
        w = rng.uniform(0.2, 1.0) * support / 2
        v += rng.normal() * np.exp(-((r - c) / w) ** 2)
    v *= np.clip((grid.r_max - r) / (0.1 * grid.r_max), 0, 1)
    v[-1] = 0.0
    return v


@dataclass(frozen=True)
class Lemma33Probe:
    rhos: tuple
    ratios: tuple
    n_samples: int

    @property
    def strictly_decreasing(self) -> bool:
        order = np.argsort(self.rhos)[::-1]
        rs = np.asarray(self.ratios)[order]
        return bool(np.all(np.diff(rs) < 0))


def lemma33_probe(prob: Problem, rhos=(1e-1, 1e-2, 1e-3), n_samples: int = 200,
                  seed: int = 0, extra_directions=()) -> Lemma33Probe:
    """Sampled sup{E2(u) : ||u||_{H1}^2 < 2 rho} / rho for each rho.

    Random directions are scaled onto the sphere ||u||^2 = 2 rho (just
    inside); the same directions are reused for every rho.
    """
    rng = np.random.default_rng(seed)
    dirs = [random_profile(prob.grid, rng, support=2.0) for _ in range(n_samples)]
    dirs += [np.asarray(_values(d), float) for d in extra_directions]
    ratios = []
    for rho in rhos:
        best = -np.inf
        for d in dirs:
            for sgn in (1.0, -1.0):
                v = sgn * d * np.sqrt(2 * rho * (1 - 1e-9)) / h1_norm(d, prob)
                e2 = float(np.dot(prob.vol, prob.alpha * prob.nonlinearity.F(v)))
                best = max(best, e2)
        ratios.append(best / rho)
    return Lemma33Probe(tuple(rhos), tuple(ratios), len(dirs))
