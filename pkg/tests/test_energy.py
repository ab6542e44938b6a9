from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from smvar.bounds import TruncationSpec, build_truncation
from smvar.energy import (Problem, energy, energy_full, gradient, gradient_values, h1_distance,
                          h1_norm, lemma33_probe, phi_of, random_profile, residual_norm, riesz)
from smvar.model import Nonlinearity, Weight, envelope_check_quadratic, envelope_check_subcritical
from smvar.radial import RadialGrid, norms

NONLINEARITIES = [
    Nonlinearity.min_abs_powers(),
    Nonlinearity.min_plus_powers(),
    Nonlinearity.log_square(),
    Nonlinearity.table([-3, -1, 0, 0.5, 2, 4], [1.0, -0.5, 0.0, 0.2, 1.5, -1.0]),
]


@pytest.fixture(scope="module")
def gaussian(grid):
    return grid.sample(lambda r: np.exp(-r * r / 2))


def test_problem_validation(grid):
    a, f = Weight.constant_annulus(), Nonlinearity.min_abs_powers()
    with pytest.raises(ValueError):
        Problem(0.0, 1.0, a, f, grid)
    with pytest.raises(ValueError):
        Problem(1.0, -1.0, a, f, grid)


def test_threshold(default_problem, grid):
    assert default_problem.threshold == pytest.approx(1 + 4 * math.sqrt(math.pi), rel=1e-10)
    zero = Problem(1.0, 0.0, Weight.zero(), Nonlinearity.min_abs_powers(), grid)
    assert zero.threshold == math.inf


def test_gaussian_energy_terms(default_problem, gaussian):
    # u = exp(-r^2/2): int u^2 = pi^{3/2}, int |u'|^2 = (3/2) pi^{3/2}, int phi u^2 = sqrt(2) pi^{5/2} e
    en = energy(gaussian, default_problem.with_lambda(3.0))
    p32 = math.pi**1.5
    assert en.mass == pytest.approx(0.5 * p32, rel=1e-6)
    assert en.dirichlet == pytest.approx(0.75 * p32, rel=1e-4)
    assert en.coupling == pytest.approx(math.sqrt(2) * math.pi**2.5 / 4, rel=1e-4)
    # u <= 1 so F(u) = u^3 / 3 on the unit ball
    pot = integrate.quad(lambda r: 4 * math.pi * r * r * math.exp(-1.5 * r * r) / 3, 0, 1)[0]
    assert en.potential == pytest.approx(pot, rel=1e-4)
    assert en.i_lambda == pytest.approx(en.e1 - 3.0 * en.potential, rel=1e-14)


def test_energy_of_zero(default_problem, grid):
    en = energy(grid.zeros(), default_problem.with_lambda(10.0))
    assert en.i_lambda == 0.0 and en.e1 == 0.0
    assert residual_norm(grid.zeros(), default_problem.with_lambda(10.0)) == 0.0


def test_gradient_pairing_with_u(default_problem, rng):
    # <g, u> = 2 dirichlet + 2 mass + 4 coupling when lambda = 0
    v = random_profile(default_problem.grid, rng)
    en = energy(v, default_problem)
    pairing = float(np.dot(gradient_values(v, default_problem), v))
    assert pairing == pytest.approx(2 * en.dirichlet + 2 * en.mass + 4 * en.coupling, rel=1e-12)


@pytest.mark.parametrize("f", NONLINEARITIES, ids=lambda f: f.kind)
def test_gradient_matches_finite_differences(f, grid, rng):
    for _ in range(5):
        prob = Problem(float(rng.uniform(0.2, 3)), float(rng.uniform(0.5, 20)),
                       Weight.constant_annulus(), f, grid)
        u, v = random_profile(grid, rng), random_profile(grid, rng)
        eps = 1e-5
        fd = (energy(u + eps * v, prob).i_lambda - energy(u - eps * v, prob).i_lambda) / (2 * eps)
        an = float(np.dot(gradient_values(u, prob), v))
        assert fd == pytest.approx(an, rel=1e-5)


def test_gradient_wrapper(default_problem, gaussian):
    g = gradient(gaussian, default_problem)
    assert g.grid is gaussian.grid
    assert np.array_equal(g.values, gradient_values(gaussian.values, default_problem))
    assert g.values[-1] == 0.0


def test_full_functional_at_phi_u(default_problem, rng):
    prob = default_problem.with_lambda(7.0)
    for _ in range(5):
        v = random_profile(prob.grid, rng)
        i = energy(v, prob).i_lambda
        assert energy_full(v, phi_of(v, prob), prob) == pytest.approx(i, rel=1e-12, abs=1e-12)


@given(st.floats(-2, 2).filter(lambda t: abs(t) > 1e-3), st.integers(0, 2**32 - 1))
def test_full_functional_maximal_in_phi(t, seed):
    g = RadialGrid.uniform(8.0, 401)
    prob = Problem(1.0, 5.0, Weight.constant_annulus(), Nonlinearity.min_abs_powers(), g)
    rng = np.random.default_rng(seed)
    v = random_profile(g, rng)
    psi = random_profile(g, rng)
    phi = phi_of(v, prob)
    assert energy_full(v, phi + t * psi, prob) < energy_full(v, phi, prob)


def test_h1_norm_consistent_with_radial_norms(gaussian, default_problem):
    assert h1_norm(gaussian, default_problem) == pytest.approx(norms(gaussian).h1, rel=1e-4)
    assert h1_distance(gaussian, gaussian, default_problem) == 0.0


def test_riesz_map_inverts_h1_form(default_problem, rng):
    prob = default_problem
    w = random_profile(prob.grid, rng)
    # at lambda = 0 the gradient of a small profile is the H^1 operator plus an O(eps^2) coupling
    lam0 = Problem(prob.e, 0.0, Weight.zero(), prob.nonlinearity, prob.grid)
    eps = 1e-3
    aw = gradient_values(eps * w, lam0) / eps
    back = riesz(aw, prob)
    assert np.max(np.abs(back - w)) <= 1e-4 * np.max(np.abs(w))


def test_residual_norm_is_dual_norm(default_problem, rng):
    prob = default_problem.with_lambda(20.0)
    v = random_profile(prob.grid, rng)
    g = gradient_values(v, prob)
    w = riesz(g, prob)
    assert residual_norm(v, prob) ** 2 == pytest.approx(float(np.dot(g, w)), rel=1e-12)
    assert float(np.dot(g, w)) == pytest.approx(h1_norm(w, prob) ** 2, rel=1e-9)


def test_random_profiles_vanish_at_rmax(grid, rng):
    for _ in range(20):
        v = random_profile(grid, rng)
        assert v[-1] == 0.0 and np.all(np.isfinite(v))


def test_lemma33_probe_decreases(default_problem):
    probe = lemma33_probe(default_problem, n_samples=50)
    assert probe.strictly_decreasing
    assert probe.n_samples == 50 and len(probe.ratios) == 3


def test_full_functional_without_potential(default_problem, rng):
    # J(u, 0) = 1/2 ||u||_H1^2 - lambda F(u)
    prob = default_problem.with_lambda(3.0)
    v = random_profile(prob.grid, rng)
    en = energy(v, prob)
    expected = en.dirichlet + en.mass - 3.0 * en.potential
    assert energy_full(v, np.zeros_like(v), prob) == pytest.approx(expected, rel=1e-12)


def test_truncation_is_not_a_solution(default_problem):
    u = build_truncation(TruncationSpec(0.5, 0.9, 0.0, 1.0), default_problem.grid)
    assert residual_norm(u, default_problem.with_lambda(100.0)) > 1e-3


def test_coercivity(default_problem, rng):
    lam = 160.0
    prob = default_problem.with_lambda(lam)
    f, sup, q = prob.nonlinearity, prob.weight.sup_norm, 0.5
    eps = 1.0 / (2 * lam * sup)
    m = envelope_check_subcritical(f, eps, q)
    v = random_profile(prob.grid, rng, support=2.0)
    # |F(s)| <= eps s^2 / 2 + m |s|^{q+1} / (q+1), and E1 >= ||u||^2 / 2
    c = lam * m / (q + 1) * float(np.dot(prob.vol, prob.alpha * np.abs(v) ** (q + 1)))
    ts = 2.0 ** np.arange(9)
    vals = np.array([energy(t * v, prob).i_lambda for t in ts])
    norm2 = h1_norm(v, prob) ** 2
    assert np.all(vals >= 0.25 * ts**2 * norm2 - c * ts ** (q + 1) - 1e-9 * np.abs(vals))
    assert np.all(np.diff(vals[-4:]) > 0) and vals[-1] > 0


def test_potential_quadratic_envelope(default_problem, rng):
    f = default_problem.nonlinearity
    sup = default_problem.weight.sup_norm
    eps = 0.5
    c = envelope_check_quadratic(f, eps)
    vol = default_problem.vol
    for _ in range(10):
        v = 10.0 ** rng.uniform(-2, 1) * random_profile(default_problem.grid, rng)
        e2 = energy(v, default_problem).potential
        bound = sup * (eps / 2 * np.dot(vol, v * v) + c * np.dot(vol, np.abs(v) ** 3))
        assert abs(e2) <= bound * (1 + 1e-12)
