"""Radial variational solver and verification toolkit for a Schrödinger–Maxwell system with sublinear f."""

from .bounds import TruncationSpec, build_truncation, interval_estimate
from .energy import Problem, energy, gradient, residual_norm
from .model import Nonlinearity, Weight, check_hypotheses, compute_cf
from .poisson import solve_phi
from .radial import RadialFunction, RadialGrid
from .solvers import SolverSettings, minimize, mountain_pass, sweep

__version__ = "0.1.0"

__all__ = [
    "Nonlinearity", "Problem", "RadialFunction", "RadialGrid", "SolverSettings", "TruncationSpec",
    "Weight", "build_truncation", "check_hypotheses", "compute_cf", "energy", "gradient",
    "interval_estimate", "minimize", "mountain_pass", "residual_norm", "solve_phi", "sweep",
]
