"""Radial grids, quadrature and norms for radially symmetric functions on R^3.

Every integral over R^3 of a radial function g is reduced to
4*pi * int_0^r_max r^2 g(r) dr on a truncated grid.  Functions that live in
H^1 (the matter field u) vanish at r_max; potentials may carry a nonzero
value at r_max that is continued outward as a monopole C/r (see ``poisson``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * np.pi
LP_EXPONENTS = (2.0, 12.0 / 5.0, 3.0, 6.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    quadrature: str = "trapezoid"
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 16:
            raise ValueError("a radial grid needs at least 16 nodes")
        if nodes[0] != 0.0:
            raise ValueError("first node must be r = 0")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        if self.quadrature not in ("trapezoid", "simpson"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        w = _quadrature_weights(nodes, self.quadrature)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, r_max: float, n: int, quadrature: str = "trapezoid") -> "RadialGrid":
        if r_max <= 0:
            raise ValueError("r_max must be positive")
        return cls(np.linspace(0.0, r_max, n), quadrature)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        """Largest cell width."""
        return float(self.spacing.max())

    @property
    def volume_weights(self) -> np.ndarray:
        """4*pi*w_i*r_i^2: the R^3 quadrature weights."""
        return FOUR_PI * self.weights * self.nodes**2

    def zeros(self) -> "RadialFunction":
        return RadialFunction(self, np.zeros(self.n))

    def sample(self, fn) -> "RadialFunction":
        return RadialFunction(self, np.asarray(fn(self.nodes), dtype=float))

    def is_node(self, r: float, rtol: float = 1e-12) -> bool:
        i = np.searchsorted(self.nodes, r)
        for j in (i - 1, i):
            if 0 <= j < self.n and abs(self.nodes[j] - r) <= rtol * max(1.0, abs(r)):
                return True
        return False

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.n == other.n
            and self.quadrature == other.quadrature
            and np.array_equal(self.nodes, other.nodes)
        )


def _quadrature_weights(nodes: np.ndarray, kind: str) -> np.ndarray:
    dr = np.diff(nodes)
    w = np.zeros_like(nodes)
    if kind == "trapezoid":
        w[:-1] += dr / 2
        w[1:] += dr / 2
        return w
    if not np.allclose(dr, dr[0], rtol=1e-10, atol=0.0):
        raise ValueError("simpson weights require a uniform grid")
    h = dr[0]
    m = nodes.size - 1
    # composite Simpson on an even number of cells, 3/8 rule on the last three if m is odd
    m_simp = m if m % 2 == 0 else m - 3
    if m_simp > 0:
        w[0:m_simp + 1:2] += 2 * h / 3
        w[1:m_simp:2] += 4 * h / 3
        w[0] -= h / 3
        w[m_simp] -= h / 3
    if m % 2 == 1:
        w[m_simp:m_simp + 4] += 3 * h / 8 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


@dataclass(frozen=True, eq=False)
class RadialFunction:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("radial function has non-finite samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def vanishes_at_rmax(self) -> bool:
        return self.values[-1] == 0.0

    def require_dirichlet(self) -> "RadialFunction":
        if not self.vanishes_at_rmax:
            raise ValueError("u must vanish at r_max (Dirichlet truncation)")
        return self

    def with_values(self, values) -> "RadialFunction":
        return RadialFunction(self.grid, values)

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        return self.with_values(self.values + _vals(self, other))

    def __sub__(self, other: "RadialFunction") -> "RadialFunction":
        return self.with_values(self.values - _vals(self, other))

    def __mul__(self, c: float) -> "RadialFunction":
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "RadialFunction":
        return self.with_values(-self.values)

    def sup(self) -> float:
        return float(np.abs(self.values).max())


def _vals(a: RadialFunction, b: RadialFunction) -> np.ndarray:
    if not a.grid.same_as(b.grid):
        raise ValueError("radial functions live on different grids")
    return b.values


@dataclass(frozen=True)
class NormReport:
    h1: float
    d12: float
    lp: dict

    def __post_init__(self):
        if self.h1 < 0 or self.d12 < 0 or any(v < 0 for v in self.lp.values()):
            raise ValueError("norms must be non-negative")


def integrate_r3(g: RadialFunction | np.ndarray, grid: RadialGrid | None = None) -> float:
    """Return 4*pi * int_0^r_max r^2 g(r) dr with the grid's composite rule."""
    if isinstance(g, RadialFunction):
        grid, vals = g.grid, g.values
    else:
        vals = np.asarray(g, dtype=float)
        if grid is None:
            raise TypeError("a raw array needs its grid")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite integrand")
    return float(np.dot(grid.volume_weights, vals))


def differentiate(u: RadialFunction) -> RadialFunction:
    """Second-order finite-difference derivative.

    Central differences in the interior, second-order one-sided stencils at
    both ends (np.gradient handles non-uniform spacing).
    """
    if u.grid.n < 3:
        raise ValueError("grid too small to differentiate")
    return u.with_values(np.gradient(u.values, u.grid.nodes, edge_order=2))


def lp_norm(u: RadialFunction, p: float) -> float:
    return integrate_r3(np.abs(u.values) ** p, u.grid) ** (1.0 / p)


def norms(u: RadialFunction) -> NormReport:
    du = differentiate(u).values
    d12_sq = integrate_r3(du**2, u.grid)
    lp = {p: lp_norm(u, p) for p in LP_EXPONENTS}
    h1 = np.sqrt(d12_sq + integrate_r3(u.values**2, u.grid))
    return NormReport(h1=float(h1), d12=float(np.sqrt(d12_sq)), lp=lp)
