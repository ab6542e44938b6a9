from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from smvar.energy import Problem
from smvar.model import Nonlinearity, Weight
from smvar.poisson import estimate_d_star, estimate_s_125
from smvar.radial import RadialGrid

settings.register_profile(
    "smvar", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("smvar")

# filled by test_acceptance.py, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {msg}")


@pytest.fixture(scope="session")
def grid() -> RadialGrid:
    return RadialGrid.uniform(20.0, 2001)


@pytest.fixture(scope="session")
def coarse_grid() -> RadialGrid:
    return RadialGrid.uniform(10.0, 401)


@pytest.fixture(scope="session")
def default_problem(grid) -> Problem:
    return Problem(1.0, 0.0, Weight.constant_annulus(), Nonlinearity.min_abs_powers(), grid)


@pytest.fixture(scope="session")
def d_star() -> float:
    return estimate_d_star()


@pytest.fixture(scope="session")
def s_125() -> float:
    return estimate_s_125()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
