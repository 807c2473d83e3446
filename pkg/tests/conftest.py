import math

import pytest

from wolbachia_stefan.model import InitialData, ModelParams
from wolbachia_stefan.pde import Grid, run

# Reference configuration shared by the dichotomy, limit-state and speed checks:
# kappa1 = 2, kappa2 = 1, so h0* = pi/2.
BASE = dict(d1=1.0, d2=1.0, delta1=1.0, delta2=1.0, b1=2.0, b2=1.0)
SPREAD_H0 = math.pi
SPREAD_MU = 1.0
VANISH_H0 = 0.5 * (math.pi / 2) * math.sqrt(BASE["d1"] / BASE["b1"])
VANISH_MU = 1e-4

ACCEPTANCE_LINES = {}


def record(criterion, passed, detail):
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


@pytest.fixture(scope="session")
def spreading_run():
    params = ModelParams(mu=SPREAD_MU, h0=SPREAD_H0, **BASE)
    grid = Grid(n_u=256, n_v=1024, xmax=80.0)
    return run(params, InitialData(), grid, horizon=40.0, sample_every=0.1)


@pytest.fixture(scope="session")
def vanishing_run():
    params = ModelParams(mu=VANISH_MU, h0=VANISH_H0, **BASE)
    grid = Grid(n_u=256, n_v=1024)
    return run(params, InitialData(), grid, horizon=20.0, sample_every=0.1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
