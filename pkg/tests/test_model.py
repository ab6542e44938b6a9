from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from smvar.model import (SQRT_PI, Annulus, InvalidNonlinearity, Nonlinearity, Sampling, Weight,
                         check_hypotheses, compute_cf, envelope_check_quadratic,
                         envelope_check_subcritical, golden_max, weight_integrability)

BUILTINS = {
    "min-abs": Nonlinearity.min_abs_powers(),
    "min-plus": Nonlinearity.min_plus_powers(),
    "min-plus-0.9-1.1": Nonlinearity.min_plus_powers(0.9, 1.1),
    "log-square": Nonlinearity.log_square(),
    "table": Nonlinearity.table([-3, -1, 0, 0.5, 2, 4], [1.0, -0.5, 0.0, 0.2, 1.5, -1.0]),
}


# -- f and F ---------------------------------------------------------------

def test_min_powers_values():
    f = Nonlinearity.min_abs_powers()
    assert f.f(0.25) == pytest.approx(0.0625)
    assert f.f(-4.0) == pytest.approx(2.0)
    assert f.F(1.0) == pytest.approx(1 / 3)
    assert f.F(4.0) == pytest.approx(1 / 3 + (2 / 3) * 7)
    g = Nonlinearity.min_plus_powers()
    assert g.f(-2.0) == 0.0 and g.F(-2.0) == 0.0


@pytest.mark.parametrize("name", sorted(BUILTINS))
@given(s=st.floats(-30, 30))
def test_primitive_matches_quadrature(name, s):
    f = BUILTINS[name]
    brk = [x for x in (-3, -1, 0, 0.5, 1, 2, 4) if min(0, s) < x < max(0, s)]
    expected = integrate.quad(lambda t: float(f.f(t)), 0.0, s, points=brk or None, limit=200)[0]
    assert float(f.F(s)) == pytest.approx(expected, rel=1e-8, abs=1e-9)


def test_primitive_vanishes_at_zero():
    for f in BUILTINS.values():
        assert float(f.F(0.0)) == 0.0


def test_callable_without_primitive_integrates_numerically():
    f = Nonlinearity.from_callable(np.sin)
    assert float(f.F(1.3)) == pytest.approx(1 - math.cos(1.3), rel=1e-6)


def test_invalid_nonlinearities():
    with pytest.raises(InvalidNonlinearity):
        Nonlinearity("cubic")
    with pytest.raises(InvalidNonlinearity):
        Nonlinearity.min_abs_powers(1.5, 2.0)
    with pytest.raises(InvalidNonlinearity):
        Nonlinearity.table([1, 2], [0, 0])
    with pytest.raises(InvalidNonlinearity):
        Nonlinearity.table([0, 0], [0, 0])


def test_round_trip():
    for f in BUILTINS.values():
        g = Nonlinearity.from_dict(f.to_dict())
        s = np.linspace(-5, 5, 101)
        assert np.array_equal(g.f(s), f.f(s)) and np.array_equal(g.F(s), f.F(s))
    with pytest.raises(TypeError):
        Nonlinearity.from_callable(np.sin).to_dict()


def test_lipschitz_constants():
    assert BUILTINS["min-abs"].lipschitz == 2.0
    assert BUILTINS["log-square"].lipschitz == 1.0
    assert BUILTINS["table"].lipschitz == pytest.approx(1.25)
    assert Nonlinearity.from_callable(np.sin).lipschitz is None


# -- hypotheses --------------------------------------------------------------

def test_hypotheses_min_powers():
    rep = check_hypotheses(Nonlinearity.min_abs_powers())
    assert rep.ok and rep.failures() == []
    assert rep.F_s0 > 0 and float(Nonlinearity.min_abs_powers().F(rep.s0)) == rep.F_s0


def test_hypotheses_zero():
    rep = check_hypotheses(Nonlinearity.zero())
    assert rep.f1_ok and rep.f2_ok and not rep.f3_ok
    assert rep.failures() == ["f3"]


def test_hypotheses_linear():
    rep = check_hypotheses(Nonlinearity.from_callable(lambda s: s, lambda s: s * s / 2))
    assert not rep.f1_ok and not rep.f2_ok and rep.f3_ok
    assert rep.n_f == pytest.approx(1.0)


def test_hypotheses_reject_non_finite():
    with pytest.raises(InvalidNonlinearity):
        check_hypotheses(Nonlinearity.from_callable(lambda s: np.where(s > 1e3, np.inf, 0 * s), lambda s: s))


def test_sampling_must_reach_large_s():
    with pytest.raises(ValueError):
        check_hypotheses(Nonlinearity.log_square(), Sampling(s_max=100.0))


# -- c_f ---------------------------------------------------------------------

def test_golden_max_parabola():
    x, fx = golden_max(lambda t: -(t - 0.3) ** 2, -1.0, 2.0)
    assert x == pytest.approx(0.3, abs=1e-8) and fx == pytest.approx(0.0, abs=1e-14)


@given(st.floats(1e-3, 1e3))
def test_cf_min_powers_closed_form(e):
    # s/(1 + 4 sqrt(pi) e s) rises on (0, 1], s^{1/2}/(s + 4 sqrt(pi) e s^2) falls after
    expected = 1.0 / (1.0 + 4.0 * SQRT_PI * e)
    assert compute_cf(Nonlinearity.min_abs_powers(), e) == pytest.approx(expected, rel=1e-10)
    assert compute_cf(Nonlinearity.min_plus_powers(), e) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("e", [0.1, 1.0, 10.0])
def test_cf_log_square_bound(e):
    assert compute_cf(Nonlinearity.log_square(), e) <= 0.8047 + 1e-3


def test_cf_log_square_small_coupling_limit():
    # e -> 0 gives max ln(1 + s^2)/|s| = 0.80474 (at s ~ 1.98)
    assert compute_cf(Nonlinearity.log_square(), 1e-9) == pytest.approx(0.804747, abs=1e-5)


def test_cf_against_dense_scan():
    f = Nonlinearity.min_plus_powers()
    best = 0.0
    for chunk in np.array_split(np.logspace(-6, 6, 10**7), 10):
        best = max(best, float(np.max(f.f(chunk) / (chunk + 4 * SQRT_PI * chunk**2))))
    assert compute_cf(f, 1.0) == pytest.approx(best, rel=1e-4)


@pytest.mark.parametrize("name", ["min-abs", "min-plus", "min-plus-0.9-1.1", "log-square", "table"])
def test_cf_below_lipschitz(name):
    f = BUILTINS[name]
    assert compute_cf(f, 1.0) <= f.lipschitz + 1e-6


@given(st.floats(1e-2, 10), st.floats(1e-2, 10))
def test_cf_monotone_in_coupling(e1, e2):
    e1, e2 = sorted((e1, e2))
    f = Nonlinearity.log_square()
    assert compute_cf(f, e1) >= compute_cf(f, e2) - 1e-9


# -- growth envelopes -----------------------------------------------------

def _fresh(rng, n=10**5):
    return rng.choice([-1.0, 1.0], n) * 10.0 ** rng.uniform(-6, 6, n)


@pytest.mark.parametrize("f,eps", [(Nonlinearity.log_square(), 0.5), (Nonlinearity.min_abs_powers(), 0.5)])
def test_quadratic_envelope_certifies(f, eps, rng):
    c = envelope_check_quadratic(f, eps)
    assert np.isfinite(c) and c > 0
    s = _fresh(rng)
    assert np.all(np.abs(f.f(s)) <= eps * np.abs(s) + c * s * s + 1e-9)


@pytest.mark.parametrize("f,eps", [(Nonlinearity.log_square(), 0.5), (Nonlinearity.min_plus_powers(), 0.1)])
def test_subcritical_envelope_certifies(f, eps, rng):
    m = envelope_check_subcritical(f, eps, 0.5)
    assert np.isfinite(m) and m > 0
    s = _fresh(rng)
    assert np.all(np.abs(f.f(s)) <= eps * np.abs(s) + m * np.abs(s) ** 0.5 + 1e-9)


def test_envelopes_of_zero():
    assert envelope_check_quadratic(Nonlinearity.zero(), 0.3) == 0.0
    assert envelope_check_subcritical(Nonlinearity.zero(), 0.3, 0.5) == 0.0


# -- weights -----------------------------------------------------------------

def test_annulus_weight_and_jump_sampling(grid):
    a = Weight.constant_annulus()
    assert a.sup_norm == 1.0 and a.annulus == Annulus(0.0, 1.0, 1.0)
    vals = a.sample(grid)
    i = int(round(1.0 / grid.h))
    assert vals[i] == 0.5 and vals[i - 1] == 1.0 and vals[i + 1] == 0.0


def test_weight_validation():
    with pytest.raises(ValueError):
        Weight.gaussian(annulus=Annulus(0.0, 1.0, 0.5))  # exp(-1) < 0.5
    with pytest.raises(ValueError):
        Weight.constant_annulus(q=1.0)
    with pytest.raises(ValueError):
        Weight("triangle")
    assert Weight.gaussian().annulus.alpha0 == pytest.approx(math.exp(-1))


def test_weight_round_trip():
    for a in (Weight.constant_annulus(2.0, 0.5, 1.5), Weight.gaussian(0.3), Weight.power_decay(3.0)):
        b = Weight.from_dict(a.to_dict())
        r = np.linspace(0, 5, 51)
        assert np.array_equal(a(r), b(r)) and a.annulus == b.annulus and a.q == b.q


def test_integrability_annulus(grid):
    res = weight_integrability(Weight.constant_annulus(), grid)
    assert res.value == pytest.approx((4 * math.pi / 3) ** 0.75, rel=1e-4)
    assert not res.diverges


def test_integrability_zero(grid):
    res = weight_integrability(Weight.zero(), grid)
    assert res.value == 0.0 and not res.diverges


def test_integrability_power_decay(grid):
    # p = 4/3: int 4 pi r^2 (1+r)^-4 dr = 4 pi B(3, 1) = 4 pi / 3
    res = weight_integrability(Weight.power_decay(3.0), grid)
    assert not res.diverges
    assert res.value == pytest.approx((4 * math.pi / 3) ** 0.75, rel=2e-2)


def test_integrability_fast_power_decay(grid):
    # int 4 pi r^2 (1+r)^-16/3 dr = 8 pi B(3, 7/3) = 8 pi / ((7/3)(10/3)(13/3))
    res = weight_integrability(Weight.power_decay(4.0), grid)
    exact = (8 * math.pi / (7 / 3 * 10 / 3 * 13 / 3)) ** 0.75
    assert not res.diverges and res.value == pytest.approx(exact, rel=1e-3)


@pytest.mark.parametrize("beta", [1.0, 2.0, 2.25])
def test_integrability_flags_slow_decay(grid, beta):
    assert weight_integrability(Weight.power_decay(beta), grid).diverges


def test_integrability_gaussian(grid):
    # int 4 pi r^2 exp(-4 r^2 / 3) dr = (3 pi / 4)^{3/2}
    res = weight_integrability(Weight.gaussian(), grid)
    assert res.value == pytest.approx(((0.75 * math.pi) ** 1.5) ** 0.75, rel=1e-6)
    assert not res.diverges


def test_custom_table_weight(grid):
    a = Weight("custom-table", 0.5, {"r": [0.0, 1.0, 2.0], "alpha": [2.0, 1.0, 0.0]})
    assert a.sup_norm == 2.0 and float(a(0.5)) == 1.5 and float(a(3.0)) == 0.0
    assert not weight_integrability(a, grid).diverges
