"""Critical points of I_lambda: descent minimizer, mountain pass, non-existence certificate, lambda sweep."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import TruncationSpec, build_truncation
from .energy import (EnergyBreakdown, Problem, energy, gradient_values, h1_distance, h1_norm,
                     phi_of, riesz)
from .model import SQRT_PI, compute_cf
from .poisson import d12_norm, prop21_identity_residual
from .radial import FOUR_PI, RadialFunction, differentiate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-6
    mp_tol: float = 1e-5
    max_iter: int = 100_000
    mp_max_iter: int = 50_000
    path_nodes: int = 32
    trivial_cutoff: float = 1e-4
    distinct_cutoff: float = 1e-2
    armijo_c: float = 1e-4
    mp_step: float = 0.4


class NotConverged(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SolutionPair:
    u: RadialFunction
    phi: RadialFunction
    lam: float
    energy: EnergyBreakdown
    residual: float
    kind: str  # trivial | minimizer | mountain-pass
    h1_norm: float
    d12_norm: float
    converged: bool = True
    iterations: int = 0

    def summary(self) -> dict:
        return {"lambda": self.lam, "kind": self.kind, "converged": self.converged,
                "residual": self.residual, "h1_norm": self.h1_norm, "d12_norm": self.d12_norm,
                "iterations": self.iterations, "energy": self.energy.to_dict()}


def _package(v: np.ndarray, prob: Problem, kind: str, residual: float, converged: bool,
             iterations: int, settings: SolverSettings) -> SolutionPair:
    phi = phi_of(v, prob)
    u = RadialFunction(prob.grid, v)
    norm = h1_norm(v, prob)
    if kind != "mountain-pass" and norm < settings.trivial_cutoff:
        kind = "trivial"
    phi_f = RadialFunction(prob.grid, phi)
    return SolutionPair(u, phi_f, prob.lam, energy(v, prob, phi), residual, kind, norm,
                        d12_norm(phi_f), converged, iterations)


def _dual_norm(g: np.ndarray, prob: Problem) -> float:
    return float(np.sqrt(max(np.dot(g, riesz(g, prob)), 0.0)))


def _descent(v: np.ndarray, prob: Problem, settings: SolverSettings, tol: float,
             max_iter: int) -> tuple[np.ndarray, float, bool, int]:
    """Preconditioned gradient descent with Armijo backtracking.

    Search direction -P^{-1} g with P = S + M(1 + e phi_u), a variable
    H^1-type metric that keeps the step length O(1) even when phi_u is large.
    """
    v = v.copy()
    v[-1] = 0.0
    step = 1.0
    phi = phi_of(v, prob)
    I = energy(v, prob, phi).i_lambda
    g = gradient_values(v, prob, phi)
    res = _dual_norm(g, prob)
    for it in range(max_iter):
        if res <= tol:
            return v, res, True, it
        d = -riesz(g, prob, prob.e * phi)
        slope = float(np.dot(g, d))
        step = min(1.0, 2.0 * step)
        while True:
            vn = v + step * d
            phin = phi_of(vn, prob)
            In = energy(vn, prob, phin).i_lambda
            if In <= I + settings.armijo_c * step * slope:
                gn = gradient_values(vn, prob, phin)
                break
            if abs(In - I) <= 1e-12 * max(1.0, abs(I)):
                # decrease below round-off: accept if the slope along d has not reversed much
                gn = gradient_values(vn, prob, phin)
                if np.dot(gn, d) <= 0.5 * abs(slope):
                    break
            step *= 0.5
            if step < 1e-14:
                return v, res, False, it
        v, phi, I, g = vn, phin, In, gn
        res = _dual_norm(g, prob)
    return v, res, res <= tol, max_iter


def minimize(prob: Problem, u_init, settings: SolverSettings = SolverSettings()) -> SolutionPair:
    """Descend I_lambda from u_init until the residual drops below settings.tol.

    A run that hits the iteration cap comes back with converged=False; callers
    must not treat it as a solution.
    """
    v0 = u_init.values if isinstance(u_init, RadialFunction) else np.asarray(u_init, float)
    if not np.all(np.isfinite(v0)) or not np.isfinite(energy(v0, prob).i_lambda):
        raise PreconditionError("initial energy is not finite")
    v, res, ok, it = _descent(v0, prob, settings, settings.tol, settings.max_iter)
    if not ok:
        log.warning("minimize: no convergence after %d iterations (residual %.3e)", it, res)
    return _package(v, prob, "minimizer", res, ok, it, settings)


# -- mountain pass ----------------------------------------------------------

def _reparametrize(path: list[np.ndarray], prob: Problem) -> list[np.ndarray]:
    """Redistribute nodes to equal H^1 arc length along the piecewise linear path."""
    seg = np.array([h1_distance(path[k + 1], path[k], prob) for k in range(len(path) - 1)])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return path
    targets = np.linspace(0.0, s[-1], len(path))
    out = [path[0]]
    for t in targets[1:-1]:
        k = min(int(np.searchsorted(s, t, side="right")) - 1, len(path) - 2)
        lam = (t - s[k]) / seg[k] if seg[k] > 0 else 0.0
        out.append((1 - lam) * path[k] + lam * path[k + 1])
    out.append(path[-1])
    return out


def _segment_scan(prob: Problem, well: np.ndarray, n_scan: int = 2001) -> tuple[float, float]:
    """Peak t* of t -> I(t * well) on (0, 1) and the point t_end past which I stays negative."""
    ts = np.geomspace(1e-6, 1.0, n_scan)
    Is = np.array([energy(t * well, prob).i_lambda for t in ts])
    k = int(np.argmax(Is[:-1]))
    nonneg = np.nonzero(Is >= 0)[0]
    j = int(nonneg[-1]) + 1 if nonneg.size else 0
    t_end = min(1.0, 2.0 * ts[min(max(j, k + 1), n_scan - 1)])
    return float(ts[k]), float(t_end)


def initial_path(prob: Problem, well: np.ndarray, K: int) -> list[np.ndarray]:
    """Segment [0, t_end * well] with half of the nodes below the energy peak along it.

    The barrier can sit at a tiny fraction of the well's amplitude, so the
    string only spans the part of the segment up to t_end, beyond which
    I_lambda stays negative; the rest of the segment is kept fixed.
    """
    t_peak, t_end = _segment_scan(prob, well)
    k_left = K // 2
    ts = np.concatenate([np.linspace(0.0, t_peak, k_left + 1)[:-1],
                         np.linspace(t_peak, t_end, K - k_left)])
    return [t * well for t in ts]


def _armijo_step(x: np.ndarray, I: float, g: np.ndarray, w: np.ndarray, prob: Problem,
                 step: float, c: float) -> tuple[np.ndarray, float]:
    """Backtrack x - step*w until I decreases sufficiently; returns (new x, step used)."""
    slope = float(np.dot(g, w))
    while step > 1e-14:
        xn = x - step * w
        In = energy(xn, prob).i_lambda
        if In <= I - c * step * slope or abs(In - I) <= 1e-12 * max(1.0, abs(I)):
            return xn, step
        step *= 0.5
    return x, step


def mountain_pass(prob: Problem, u_well: SolutionPair, settings: SolverSettings = SolverSettings(),
                  path: list[np.ndarray] | None = None) -> SolutionPair:
    """Climbing-image string method between 0 and a negative-energy well.

    K path nodes start on the segment [0, t_end * u_well] (see
    ``initial_path``); the remaining piece of the segment up to u_well has
    negative energy and stays fixed.  Every sweep moves the interior nodes
    along the part of the preconditioned negative gradient normal to the
    string, with an Armijo step; the node of highest energy instead climbs
    (its gradient component along the local tangent is reversed).  No node
    moves further than half the distance to its neighbours in one sweep.
    The two sub-strings on either side of the climbing node are then
    reparametrized to equal H^1 arc length.  Stops when the climbing
    node's residual is below settings.mp_tol.
    """
    if u_well.energy.i_lambda >= 0 or u_well.kind == "trivial":
        raise PreconditionError("mountain pass needs a nontrivial well with I_lambda < 0")
    well = u_well.u.values
    if path is None:
        path = initial_path(prob, well, settings.path_nodes)
    path = [np.asarray(x, float) for x in path]
    K = len(path)
    steps = np.full(K, settings.mp_step)
    converged = False
    for it in range(settings.mp_max_iter):
        phis = [phi_of(x, prob) for x in path]
        Is = np.array([energy(x, prob, ph).i_lambda for x, ph in zip(path, phis)])
        c = int(np.argmax(Is[1:-1])) + 1
        g_c = gradient_values(path[c], prob, phis[c])
        res = _dual_norm(g_c, prob)
        if res <= settings.mp_tol:
            converged = True
            break
        new = list(path)
        for k in range(1, K - 1):
            pot = prob.e * phis[k]
            g = g_c if k == c else gradient_values(path[k], prob, phis[k])
            w = riesz(g, prob, pot)
            tang = path[k + 1] - path[k - 1]
            nrm = math.sqrt(max(float(np.dot(tang, riesz_apply(tang, prob, pot))), 1e-300))
            tang = tang / nrm
            cap = 0.5 * min(h1_distance(path[k], path[k - 1], prob),
                            h1_distance(path[k], path[k + 1], prob))
            if k == c:
                w = w - 2.0 * float(np.dot(g, tang)) * tang
            else:
                # sliding along the string is undone by reparametrization; drop it
                w = w - float(np.dot(g, tang)) * tang
            # no node moves further than half the distance to a neighbour
            size = steps[k] * h1_norm(w, prob)
            if size > cap > 0:
                w = w * (cap / size)
            if k == c:
                new[k] = path[k] - steps[k] * w
            else:
                new[k], used = _armijo_step(path[k], Is[k], g, w, prob, steps[k], settings.armijo_c)
                steps[k] = min(settings.mp_step, 2.0 * used)
            new[k][-1] = 0.0
        path = _reparametrize(new[: c + 1], prob)[:-1] + _reparametrize(new[c:], prob)
    else:
        it = settings.mp_max_iter
        log.warning("mountain_pass: no convergence after %d sweeps (residual %.3e)", it, res)
    sol = _package(path[c], prob, "mountain-pass", res, converged, it, settings)
    if sol.h1_norm < settings.trivial_cutoff or \
            h1_distance(sol.u, u_well.u, prob) < settings.distinct_cutoff:
        raise NotConverged("mountain-pass path collapsed onto an endpoint")
    return sol


def riesz_apply(v: np.ndarray, prob: Problem, potential: np.ndarray) -> np.ndarray:
    """P v with P = S + M(1 + potential) (Dirichlet node dropped)."""
    c = prob.stiffness
    dv = np.diff(v)
    out = np.zeros_like(v)
    out[:-1] -= c * dv
    out[1:] += c * dv
    out += prob.vol * (1.0 + potential) * v
    out[-1] = 0.0
    return out


# -- non-existence certificate -----------------------------------------------

@dataclass(frozen=True)
class CandidateCheck:
    nontrivial: bool
    tested_identity_gap: float
    is_solution: bool
    cubic_lhs: float
    cubic_rhs: float
    contraction_lhs: float
    contraction_rhs: float

    @property
    def inconsistent(self) -> bool:
        # a nontrivial discrete solution below threshold contradicts the estimate chain
        return self.nontrivial and self.is_solution


@dataclass(frozen=True)
class NonexistenceReport:
    applicable: bool
    threshold: float
    lam: float
    checks: tuple
    passes: bool

    def to_dict(self) -> dict:
        return {"applicable": self.applicable, "threshold": self.threshold, "lambda": self.lam,
                "passes": self.passes, "checks": [c.__dict__ for c in self.checks]}


def certify_nonexistence(prob: Problem, candidates, settings: SolverSettings = SolverSettings(),
                         identity_tol: float | None = None) -> NonexistenceReport:
    """Run the tested-identity / cubic / contraction chain on each candidate.

    Passes iff every candidate that actually satisfies the tested identity
    (i.e. survives as a solution) is trivial.
    """
    threshold = prob.threshold
    lam = prob.lam
    if not prob.weight.is_zero and not lam < threshold:
        return NonexistenceReport(False, threshold, lam, (), False)
    cf = compute_cf(prob.nonlinearity, prob.e)
    sup = prob.weight.sup_norm
    tol = identity_tol if identity_tol is not None else 10 * settings.tol
    checks = []
    for cand in candidates:
        u = cand.u if isinstance(cand, SolutionPair) else cand
        v = u.values
        phi = phi_of(v, prob)
        vol = prob.vol
        du = differentiate(u).values
        dphi = differentiate(RadialFunction(prob.grid, phi)).values
        grad_u_sq = 2 * energy(v, prob, phi).dirichlet
        lhs_identity = grad_u_sq + np.dot(vol, v * v) + prob.e * np.dot(vol, phi * v * v)
        rhs_identity = lam * np.dot(vol, prob.alpha * prob.nonlinearity.f(v) * v)
        gap = abs(lhs_identity - rhs_identity) / max(1.0, abs(lhs_identity))
        phi_tail = FOUR_PI * prob.grid.r_max * phi[-1] ** 2
        cubic_lhs = 4 * SQRT_PI * prob.e * np.dot(vol, np.abs(v) ** 3)
        cubic_rhs = (np.dot(vol, dphi**2) + phi_tail) / FOUR_PI + np.dot(vol, du**2)
        contraction_lhs = np.dot(vol, v * v + 4 * SQRT_PI * prob.e * np.abs(v) ** 3)
        contraction_rhs = lam * sup * cf * contraction_lhs
        checks.append(CandidateCheck(
            nontrivial=h1_norm(v, prob) >= settings.trivial_cutoff,
            tested_identity_gap=float(gap),
            is_solution=bool(gap <= tol),
            cubic_lhs=float(cubic_lhs), cubic_rhs=float(cubic_rhs),
            contraction_lhs=float(contraction_lhs), contraction_rhs=float(contraction_rhs),
        ))
    passes = not any(c.inconsistent for c in checks)
    return NonexistenceReport(True, threshold, lam, tuple(checks), passes)


# -- multi-start and sweep ---------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    lam: float
    n_solutions: int
    energies: tuple
    h1_norms: tuple
    threshold: float
    kinds: tuple = ()
    residuals: tuple = ()
    error: str | None = None

    @property
    def min_energy(self) -> float | None:
        e = [en for en, k in zip(self.energies, self.kinds) if k == "minimizer"]
        return min(e) if e else None

    @property
    def mp_energy(self) -> float | None:
        e = [en for en, k in zip(self.energies, self.kinds) if k == "mountain-pass"]
        return e[0] if e else None


@dataclass
class SolveOutcome:
    lam: float
    solutions: list = field(default_factory=list)  # distinct nontrivial SolutionPairs
    trivial: SolutionPair | None = None
    failures: list = field(default_factory=list)
    starts: list = field(default_factory=list)


def start_profiles(prob: Problem, truncation: TruncationSpec | None, rng: np.random.Generator,
                   n_random: int = 3) -> list[np.ndarray]:
    """0, u_sigma0 and n_random random Gaussian bumps inside the weight's annulus scale."""
    grid = prob.grid
    r = grid.nodes
    starts = [np.zeros(grid.n)]
    if truncation is not None:
        starts.append(build_truncation(truncation, grid).values.copy())
    R = prob.weight.annulus.R_outer
    for _ in range(n_random):
        amp = math.exp(rng.uniform(math.log(0.5), math.log(20.0)))
        width = rng.uniform(0.3, 1.5) * R
        v = amp * np.exp(-((r / width) ** 2))
        v[-1] = 0.0
        starts.append(v)
    return starts


def solve_lambda(prob: Problem, truncation: TruncationSpec | None, seed_seq: np.random.SeedSequence,
                 settings: SolverSettings = SolverSettings(), with_mountain_pass: bool = True) -> SolveOutcome:
    """Multi-start minimization at one lambda, then a mountain pass from the deepest well."""
    rng = np.random.default_rng(seed_seq)
    out = SolveOutcome(prob.lam)
    minimizers = []
    for v0 in start_profiles(prob, truncation, rng):
        sol = minimize(prob, v0, settings)
        out.starts.append(sol)
        if not sol.converged:
            out.failures.append(f"minimize did not converge (residual {sol.residual:.2e})")
            continue
        if sol.kind == "trivial":
            out.trivial = out.trivial or sol
            continue
        minimizers.append(sol)
    distinct = _dedup(minimizers, prob, settings)
    out.solutions.extend(distinct)
    wells = [s for s in distinct if s.energy.i_lambda < 0]
    if with_mountain_pass and wells:
        deepest = min(wells, key=lambda s: s.energy.i_lambda)
        try:
            mp = mountain_pass(prob, deepest, settings)
            if not mp.converged:
                out.failures.append(f"mountain pass did not converge (residual {mp.residual:.2e})")
            else:
                out.solutions = _dedup(out.solutions + [mp], prob, settings)
        except NotConverged as exc:
            out.failures.append(str(exc))
    return out


def _dedup(sols: list[SolutionPair], prob: Problem, settings: SolverSettings) -> list[SolutionPair]:
    kept: list[SolutionPair] = []
    for s in sorted(sols, key=lambda s: s.energy.i_lambda):
        if all(h1_distance(s.u, k.u, prob) > settings.distinct_cutoff for k in kept):
            kept.append(s)
    return kept


def _record(outcome: SolveOutcome, threshold: float) -> SweepRecord:
    sols = outcome.solutions
    error = "; ".join(outcome.failures) or None
    return SweepRecord(
        lam=outcome.lam, n_solutions=len(sols),
        energies=tuple(s.energy.i_lambda for s in sols),
        h1_norms=tuple(s.h1_norm for s in sols),
        threshold=threshold,
        kinds=tuple(s.kind for s in sols),
        residuals=tuple(s.residual for s in sols),
        error=error,
    )


def _sweep_job(args):
    prob, truncation, seed_seq, settings = args
    try:
        return _record(solve_lambda(prob, truncation, seed_seq, settings), prob.threshold)
    except Exception as exc:  # per-lambda failures never abort the sweep
        return SweepRecord(prob.lam, 0, (), (), prob.threshold, error=f"{type(exc).__name__}: {exc}")


def sweep(template: Problem, lambdas, truncation: TruncationSpec | None = None, seed: int = 42,
          settings: SolverSettings = SolverSettings(), jobs: int = 1) -> list[SweepRecord]:
    lambdas = [float(x) for x in lambdas]
    if lambdas != sorted(lambdas):
        raise ValueError("lambdas must be sorted ascending")
    if not lambdas:
        return []
    seqs = np.random.SeedSequence(seed).spawn(len(lambdas))
    args = [(template.with_lambda(lam), truncation, sq, settings) for lam, sq in zip(lambdas, seqs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_sweep_job, args))
    else:
        records = [_sweep_job(a) for a in args]
    return sorted(records, key=lambda rec: rec.lam)


def verify_solution(sol: SolutionPair, prob: Problem, settings: SolverSettings = SolverSettings()) -> dict:
    """Residual, Poisson identity and phi consistency checks for a returned solution."""
    phi = phi_of(sol.u.values, prob)
    scale = max(1.0, float(np.abs(phi).max()))
    tol = settings.mp_tol if sol.kind == "mountain-pass" else settings.tol
    return {
        "residual_ok": sol.residual <= tol,
        "identity_residual": prop21_identity_residual(sol.u, prob.e),
        "phi_consistent": float(np.abs(phi - sol.phi.values).max()) <= 1e-10 * scale,
    }
