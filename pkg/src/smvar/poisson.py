"""The reduction map u -> phi_u solving -Laplace(phi) = 4 pi e u^2 on R^3.

phi_u is the Newton potential of the radial source,

    phi(r) = 4 pi e [ (1/r) int_0^r s^2 u^2 ds + int_r^inf s u^2 ds ],

evaluated by cumulative quadrature with the grid weights.  Written as
phi_i = 4 pi e sum_j w_j r_j^2 u_j^2 / max(r_i, r_j) the discrete map is a
symmetric kernel, which is what makes the coupling gradient e*phi_u*u exact
for the discretized energy.  Since u vanishes beyond r_max, phi continues
outward as the monopole phi(r_max) r_max / r; the D^{1,2} and L^6 norms
below include that exterior contribution analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.linalg import solve_banded

from .radial import FOUR_PI, RadialFunction, RadialGrid, differentiate, integrate_r3, lp_norm


@dataclass(frozen=True)
class PoissonSolution:
    phi: RadialFunction
    d12_norm: float
    interaction: float

    @property
    def charge(self) -> float:
        """Monopole coefficient C with phi(r) = C/r outside the grid."""
        return float(self.phi.values[-1] * self.phi.grid.r_max)


def newton_potential(rho: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """phi_i = 4 pi sum_j w_j r_j^2 rho_j / max(r_i, r_j) (no coupling factor)."""
    r, w = grid.nodes, grid.weights
    inner = np.cumsum(w * r * r * rho)
    outer = np.cumsum((w * r * rho)[::-1])[::-1]
    outer = np.concatenate([outer[1:], [0.0]])
    first = np.zeros_like(r)
    first[1:] = inner[1:] / r[1:]
    return FOUR_PI * (first + outer)


def solve_phi(u: RadialFunction, e: float) -> PoissonSolution:
    if e <= 0:
        raise ValueError("coupling e must be positive")
    phi = u.with_values(e * newton_potential(u.values**2, u.grid))
    interaction = integrate_r3(phi.values * u.values**2, u.grid)
    return PoissonSolution(phi, d12_norm(phi), interaction)


def d12_norm_sq(phi: RadialFunction) -> float:
    """int |grad phi|^2 over R^3 with the monopole exterior added.

    Interior gradient by finite differences (second order).
    """
    dphi = differentiate(phi).values
    tail = FOUR_PI * phi.grid.r_max * phi.values[-1] ** 2
    return integrate_r3(dphi**2, phi.grid) + tail


def d12_norm(phi: RadialFunction) -> float:
    return float(np.sqrt(d12_norm_sq(phi)))


def harmonic_d12_sq(phi: np.ndarray, grid: RadialGrid) -> float:
    """Exact Dirichlet energy of the interpolant that is linear in 1/r per cell.

    This is the quadratic form inverse to the discrete Newton kernel, so
    harmonic_d12_sq(phi_u) == 4 pi e int phi_u u^2 holds to round-off.
    """
    r = grid.nodes
    dphi = np.diff(phi)[1:]
    dx = 1.0 / r[1:-1] - 1.0 / r[2:]
    # first cell [0, r_1]: 1/r_0 is infinite, so the cell carries no energy
    return float(FOUR_PI * (np.sum(dphi**2 / dx) + r[-1] * phi[-1] ** 2))


def l6_norm(phi: RadialFunction) -> float:
    C = phi.values[-1] * phi.grid.r_max
    tail = FOUR_PI * C**6 / (3.0 * phi.grid.r_max**3)
    return float((integrate_r3(phi.values**6, phi.grid) + tail) ** (1 / 6))


def solve_phi_fd(u: RadialFunction, e: float) -> np.ndarray:
    """Independent check: finite-difference solve of -(r^2 phi')'/r^2 = 4 pi e u^2.

    Conservative three-point stencil in the flux r^2 phi', phi'(0) = 0 and
    the Robin condition phi' + phi/r = 0 at r_max (monopole decay).
    """
    r = u.grid.nodes
    n = r.size
    h = np.diff(r)
    rm = (r[:-1] + r[1:]) / 2
    flux = rm**2 / h
    # control volume around node i: [r_{i-1/2}, r_{i+1/2}], volume int r^2 dr
    edges = np.concatenate([[0.0], rm, [r[-1]]])
    vol = (edges[1:] ** 3 - edges[:-1] ** 3) / 3.0
    diag = np.zeros(n)
    diag[:-1] += flux
    diag[1:] += flux
    diag[-1] += r[-1]  # r^2 phi' = -r phi at r_max
    ab = np.zeros((3, n))
    ab[0, 1:] = -flux
    ab[1] = diag
    ab[2, :-1] = -flux
    # source integrated exactly over each control volume for piecewise-linear u^2
    rho = FOUR_PI * e * u.values**2
    return solve_banded((1, 1), ab, rho * vol)


def prop21_identity_residual(u: RadialFunction, e: float) -> float:
    """| ||phi_u||^2_{D12} - 4 pi e int phi_u u^2 | / max(1, ||phi_u||^2)."""
    sol = solve_phi(u, e)
    lhs = sol.d12_norm**2
    return abs(lhs - FOUR_PI * e * sol.interaction) / max(1.0, lhs)


@dataclass(frozen=True)
class BoundsReport:
    d12_norm: float
    d12_bound: float
    interaction: float
    interaction_bound: float
    tol: float

    @property
    def d12_slack(self) -> float:
        return self.d12_bound - self.d12_norm

    @property
    def interaction_slack(self) -> float:
        return self.interaction_bound - self.interaction

    @property
    def ok(self) -> bool:
        scale = max(1.0, self.d12_bound)
        iscale = max(1.0, self.interaction_bound)
        return self.d12_slack >= -self.tol * scale and self.interaction_slack >= -self.tol * iscale


def prop21_bounds_check(u: RadialFunction, e: float, d_star: float, tol: float = 1e-9) -> BoundsReport:
    """Check ||phi_u|| <= 4 pi e d* ||u||_{12/5}^2 and int phi_u u^2 <= 4 pi e d*^2 ||u||_{12/5}^4."""
    if d_star <= 0:
        raise ValueError("d_star must be positive")
    sol = solve_phi(u, e)
    n125 = lp_norm(u, 12 / 5)
    return BoundsReport(
        d12_norm=sol.d12_norm,
        d12_bound=FOUR_PI * e * d_star * n125**2,
        interaction=sol.interaction,
        interaction_bound=FOUR_PI * e * d_star**2 * n125**4,
        tol=tol,
    )


# -- embedding constants ---------------------------------------------------

def _bump_ratio_l6(beta: float) -> float:
    # phi = (1 + r^2)^-beta on all of R^3 (the 4 pi factors enter with powers 1/6 and 1/2)
    l6 = integrate.quad(lambda r: r**2 * (1 + r * r) ** (-6 * beta), 0, np.inf, limit=400)[0]
    d12 = integrate.quad(lambda r: r**2 * (2 * beta * r) ** 2 * (1 + r * r) ** (-2 * beta - 2),
                         0, np.inf, limit=400)[0]
    return (FOUR_PI * l6) ** (1 / 6) / (FOUR_PI * d12) ** 0.5


def estimate_d_star(beta_range: tuple[float, float] = (0.3, 3.0)) -> float:
    """Lower estimate of the D^{1,2} -> L^6 constant from the bumps (1+r^2)^-beta."""
    res = optimize.minimize_scalar(lambda b: -_bump_ratio_l6(b), bounds=beta_range,
                                   method="bounded", options={"xatol": 1e-10})
    return float(-res.fun)


def _gauss_ratio_125(a: float) -> float:
    # u = exp(-r^2/a^2): int u^p = (pi a^2/p)^{3/2}, int |grad u|^2 = (3/a^2)(pi a^2/2)^{3/2}
    p = 12 / 5
    lp = (np.pi * a * a / p) ** 1.5
    base = (np.pi * a * a / 2) ** 1.5
    return lp ** (1 / p) / (base * (1 + 3 / (a * a))) ** 0.5


def estimate_s_125(a_range: tuple[float, float] = (0.05, 50.0)) -> float:
    """Lower estimate of the H^1 -> L^{12/5} constant from Gaussians of width a."""
    res = optimize.minimize_scalar(lambda la: -_gauss_ratio_125(np.exp(la)),
                                   bounds=tuple(np.log(a_range)), method="bounded",
                                   options={"xatol": 1e-10})
    return float(-res.fun)
