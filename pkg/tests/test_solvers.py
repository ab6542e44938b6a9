from __future__ import annotations

import numpy as np
import pytest

from smvar.bounds import TruncationSpec, build_truncation
from smvar.energy import Problem, energy, h1_distance, random_profile
from smvar.model import Nonlinearity, Weight
from smvar.radial import RadialFunction
from smvar.solvers import (PreconditionError, SolverSettings, _dedup, certify_nonexistence,
                           initial_path, minimize, mountain_pass, solve_lambda, start_profiles,
                           sweep, verify_solution)

LAM = 160.0
SPEC = TruncationSpec(0.28184, 0.9, 0.0, 1.0)


@pytest.fixture(scope="module")
def prob(default_problem):
    return default_problem.with_lambda(LAM)


@pytest.fixture(scope="module")
def well(prob):
    return minimize(prob, build_truncation(SPEC, prob.grid))


@pytest.fixture(scope="module")
def mp(prob, well):
    return mountain_pass(prob, well)


def test_minimize_at_zero_lambda_is_trivial(default_problem, rng):
    sol = minimize(default_problem, random_profile(default_problem.grid, rng))
    assert sol.converged and sol.kind == "trivial" and sol.h1_norm < 1e-4


def test_minimizer(prob, well):
    assert well.converged and well.kind == "minimizer"
    assert well.residual <= 1e-6
    assert well.energy.i_lambda < 0
    checks = verify_solution(well, prob)
    assert checks["residual_ok"] and checks["phi_consistent"]
    assert checks["identity_residual"] <= 1e-3


def test_minimizer_is_a_weak_solution(prob, well):
    # tested identity: int |u'|^2 + u^2 + e phi u^2 = lambda int alpha f(u) u
    v = well.u.values
    vol = prob.vol
    lhs = 2 * well.energy.dirichlet + np.dot(vol, v * v) + prob.e * np.dot(vol, well.phi.values * v * v)
    rhs = LAM * np.dot(vol, prob.alpha * prob.nonlinearity.f(v) * v)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_minimizer_beats_perturbations(prob, well, rng):
    base = well.energy.i_lambda
    for _ in range(5):
        d = random_profile(prob.grid, rng)
        assert energy(well.u.values + 1e-3 * d, prob).i_lambda >= base - 1e-12


def test_mountain_pass(prob, well, mp):
    assert mp.converged and mp.kind == "mountain-pass"
    assert mp.residual <= 1e-5
    assert mp.energy.i_lambda > 0 > well.energy.i_lambda
    assert h1_distance(mp.u, well.u, prob) > 1e-2
    assert mp.h1_norm > 1e-4


def test_initial_path_endpoints(prob, well):
    path = initial_path(prob, well.u.values, 16)
    assert len(path) == 16
    assert np.all(path[0] == 0)
    assert energy(path[-1], prob).i_lambda < 0


def test_minimize_reports_non_convergence(prob, rng):
    sol = minimize(prob, 5 * random_profile(prob.grid, rng), SolverSettings(max_iter=2))
    assert not sol.converged


def test_minimize_rejects_non_finite_start(prob):
    v = np.zeros(prob.grid.n)
    v[3] = np.inf
    with pytest.raises(PreconditionError):
        minimize(prob, v)


def test_start_profiles(prob, rng):
    starts = start_profiles(prob, SPEC, rng, n_random=3)
    assert len(starts) == 5 and np.all(starts[0] == 0)
    assert all(s[-1] == 0 for s in starts)
    assert len(start_profiles(prob, None, rng, n_random=2)) == 3


def test_dedup_merges_close_profiles(prob, well):
    twin = minimize(prob, well.u.values * (1 + 1e-9))
    assert len(_dedup([well, twin], prob, SolverSettings())) == 1


def test_solve_lambda_two_solutions(prob):
    out = solve_lambda(prob, SPEC, np.random.SeedSequence(0))
    assert not out.failures
    kinds = sorted(s.kind for s in out.solutions)
    assert kinds == ["minimizer", "mountain-pass"]
    assert out.trivial is not None


def test_below_threshold_only_trivial(default_problem, rng):
    prob = default_problem.with_lambda(0.5 * default_problem.threshold)
    sols = [minimize(prob, 10 * random_profile(prob.grid, rng)) for _ in range(3)]
    assert all(s.converged and s.h1_norm < 1e-4 for s in sols)
    rep = certify_nonexistence(prob, sols)
    assert rep.applicable and rep.passes
    for c in rep.checks:
        assert c.cubic_lhs <= c.cubic_rhs * (1 + 1e-3) + 1e-12


def test_certificate_not_applicable_above_threshold(prob, well):
    rep = certify_nonexistence(prob, [well])
    assert not rep.applicable and not rep.passes


def test_certificate_ignores_non_solutions(default_problem, rng):
    prob = default_problem.with_lambda(0.5 * default_problem.threshold)
    fake = prob.grid.sample(lambda r: np.exp(-r * r)).values
    rep = certify_nonexistence(prob, [RadialFunction(prob.grid, fake)])
    (c,) = rep.checks
    assert c.nontrivial and not c.is_solution and rep.passes
    assert c.cubic_lhs <= c.cubic_rhs
    assert c.contraction_rhs < c.contraction_lhs


def test_certificate_with_zero_weight(grid):
    prob = Problem(1.0, 50.0, Weight.zero(), Nonlinearity.min_abs_powers(), grid)
    rep = certify_nonexistence(prob, [minimize(prob, np.zeros(grid.n))])
    assert rep.applicable and rep.passes


def test_sweep_order_and_determinism(default_problem):
    lams = [4.0, 40.0]
    a = sweep(default_problem, lams, SPEC, seed=7)
    b = sweep(default_problem, lams, SPEC, seed=7, jobs=2)
    assert [r.lam for r in a] == lams
    assert [(r.n_solutions, r.energies) for r in a] == [(r.n_solutions, r.energies) for r in b]
    assert a[0].n_solutions == 0 and a[1].n_solutions == 2
    assert a[1].min_energy < 0 <= a[1].mp_energy


def test_sweep_input_validation(default_problem):
    assert sweep(default_problem, []) == []
    with pytest.raises(ValueError):
        sweep(default_problem, [5.0, 1.0])
