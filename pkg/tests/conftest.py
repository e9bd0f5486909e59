import math
from fractions import Fraction

import pytest

from tricomi_lab.adjoint import build_profile
from tricomi_lab.eigenfunction import EigenfunctionEvaluator
from tricomi_lab.regime import ProblemParams
from tricomi_lab.simulator import Grid, InitialData, SolverConfig, run

BASELINE = dict(n=1, ell=Fraction(-1, 2), mu2=Fraction(1, 2), alpha=0, p=2)
# omega = 2 pi: shells j = 1, 2 end before t = 7.4
SHELL = dict(n=1, ell=-0.5, mu2=4 * math.pi**2 + 0.25, alpha=2, p=3)


@pytest.fixture(scope="session")
def baseline():
    return ProblemParams(eps=0.1, **BASELINE)


@pytest.fixture(scope="session")
def profile_200(baseline):
    return build_profile(1.0, baseline, 200.0)


@pytest.fixture(scope="session")
def q_tables(baseline):
    """Adjoint profile and eigenfunction with lambda = 1 on [0, 10]."""
    return build_profile(1.0, baseline, 10.0), EigenfunctionEvaluator(1, 1.0)


def baseline_run(params, tables, dr, t_max=10.0, **cfg):
    prof, ev = tables
    grid = Grid.for_run(1.0, float(params.ell), t_max, dr)
    return run(params, InitialData(), grid, t_max, SolverConfig(**cfg), prof, ev)[0]


@pytest.fixture(scope="session")
def q_runs(baseline, q_tables):
    """Baseline runs at dr = 1/256 for eps in {0.1, 0.2, 0.4}."""
    return {e: baseline_run(baseline.with_eps(e), q_tables, 1 / 256) for e in (0.1, 0.2, 0.4)}


def shell_run(eps=0.3, dr=1 / 128, t_max=7.5, **cfg):
    P = ProblemParams(eps=eps, **SHELL)
    grid = Grid.for_run(1.0, P.ell, t_max, dr)
    return run(P, InitialData(), grid, t_max, SolverConfig(**cfg))


@pytest.fixture(scope="session")
def shell_trace():
    return shell_run()[0]


# acceptance criterion -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
