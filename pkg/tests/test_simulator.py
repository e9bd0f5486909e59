import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.integrate import solve_ivp

from tricomi_lab.adjoint import build_profile
from tricomi_lab.eigenfunction import EigenfunctionEvaluator, sphere_area
from tricomi_lab.errors import ConfigurationError, DomainError
from tricomi_lab.geometry import VelocityModel, h
from tricomi_lab.regime import ProblemParams
from tricomi_lab.simulator import (Grid, InitialData, RadialLaplacian, SolverConfig, Status, detect_blowup,
                                   functionals, make_data, plateau_bump, run, smooth_bump)

from conftest import BASELINE

VEL = VelocityModel(-0.5)


def params(eps=0.1, **kw):
    d = dict(BASELINE)
    d.update(kw)
    return ProblemParams(eps=eps, **d)


def manufactured(n, ell, mu2, alpha, p, r0=1.0):
    """Source making ``u* = (1+t) e^{-t} b(r)`` an exact solution, b the smooth bump.

    u*(0) = b and u*_t(0) = 0, so the data are ``f = b, g = 0`` at eps = 1.
    """
    t, r = sp.symbols("t r", real=True)
    b = sp.exp(1 - 1 / (1 - (r / r0) ** 2))
    T = (1 + t) * sp.exp(-t)
    fb, fb1, fb2 = (sp.lambdify(r, e, "numpy") for e in (b, sp.diff(b, r), sp.diff(b, r, 2)))
    fT, fTtt = sp.lambdify(t, T, "numpy"), sp.lambdify(t, sp.diff(T, t, 2), "numpy")
    tables = {}

    def spatial(rr):
        key = (rr.size, rr[1] - rr[0])
        if key not in tables:
            B, L = np.zeros_like(rr), np.zeros_like(rr)
            m = rr < r0 * (1 - 1e-9)
            x = rr[m]
            B[m] = fb(x)
            safe = np.where(x > 0, x, 1.0)
            L[m] = fb2(x) + (n - 1) * np.where(x > 0, fb1(x) / safe, fb2(x))
            tables[key] = B, L
        return tables[key]

    def source(tt, rr):
        B, L = spatial(rr)
        T0 = fT(tt)
        return (fTtt(tt) * B - (1 + tt) ** (2 * ell) * T0 * L + mu2 / (1 + tt) ** 2 * T0 * B
                - (1 + tt) ** (-alpha) * np.abs(T0 * B) ** p)

    def exact(tt, rr):
        return fT(tt) * spatial(rr)[0]

    return source, exact


# data and grid

def test_bumps():
    r = np.linspace(0, 2, 2001)
    b = smooth_bump(r, 1.0)
    assert b[0] == 1.0 and np.all(b[r >= 1] == 0) and np.all(b[r < 1] > 0)
    assert np.all(np.diff(b) <= 0)
    q = plateau_bump(r, 1.0)
    assert np.all(q[r <= 0.5] == 1.0)
    assert np.all(q[r >= 1] == 0) and np.all(q[r < 1] > 0)
    assert np.all(np.diff(q) <= 0)


def test_initial_data_errors():
    with pytest.raises(DomainError):
        InitialData(f_amp=0.0, g_amp=0.0)
    with pytest.raises(DomainError):
        InitialData(f_amp=-1.0)
    with pytest.raises(DomainError):
        InitialData(r0=0.0)
    with pytest.raises(ValueError):
        InitialData(shape="square")
    with pytest.raises(DomainError):
        Grid(0.1, 0.05)


def test_make_data_requires_resolution():
    with pytest.raises(ConfigurationError):
        make_data(InitialData(), Grid(1 / 16, 4.0))
    f, g = make_data(InitialData(f_amp=2.0, g_amp=0.5), Grid(1 / 64, 4.0))
    assert f[0] == 2.0 and g[0] == 0.5 and np.all(g == 0.25 * f)


def test_grid_reaches_past_cone():
    g = Grid.for_run(1.0, -0.5, 10.0, 1 / 64)
    assert g.r_max >= 1 + VEL.A(10.0) + 0.5
    assert g.r[-1] == pytest.approx(g.r_max)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_volumes_partition_ball(n):
    g = Grid(1 / 64, 3.0)
    assert g.volumes(n).sum() == pytest.approx(g.r_max**n / n, rel=1e-12)


# discrete Laplacian

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_laplacian_constants_and_symmetry(n):
    g = Grid(1 / 32, 3.0)
    L = RadialLaplacian(g, n)
    one = np.ones(g.n_points)
    assert np.max(np.abs(L(one)[:-2])) <= 1e-9
    rng = np.random.default_rng(n)
    u, w = rng.normal(size=(2, g.n_points))
    u[-1] = w[-1] = 0.0
    lhs = np.sum(L.V * L(u) * w)
    rhs = np.sum(L.V * u * L(w))
    assert lhs == pytest.approx(rhs, rel=1e-10)
    # negative semidefinite
    assert np.sum(L.V * L(u) * u) < 0


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=3))
@settings(max_examples=20, deadline=None)
def test_laplacian_exact_on_r_squared(n, k):
    # Lap r^2 = 2n in the continuum; the conservative stencil reproduces it away from the boundary
    g = Grid(1 / (16 * k), 2.0)
    L = RadialLaplacian(g, n)
    val = L(g.r**2)[:-2]
    assert np.max(np.abs(val - 2 * n)) <= 1e-8


# correctness oracles

@pytest.mark.parametrize("n", [1, 3])
def test_mms_second_order(n):
    src, exact = manufactured(n, -0.5, 0.5, 0, 2)
    P = params(eps=1.0, n=n)
    errs = []
    for dr in (1 / 64, 1 / 128, 1 / 256):
        grid = Grid.for_run(1.0, -0.5, 1.0, dr)
        tr, _ = run(P, InitialData(), grid, 1.0, SolverConfig(source=src, sample_every=10**9))
        t, u, _ = tr.final
        errs.append(np.max(np.abs(u - exact(t, grid.r))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert abs(orders[-1] - 2) <= 0.2, orders


@pytest.mark.parametrize("n", [1, 3])
def test_finite_speed_containment(n):
    dr = 1 / 2048
    t_max = 3.0
    grid = Grid.for_run(1.0, -0.5, t_max, dr)
    snaps = (0.5, 1.0, 2.0, 3.0)
    tr, _ = run(params(eps=0.3, n=n), InitialData(), grid, t_max,
                SolverConfig(sample_every=10**9, snapshot_times=snaps))
    assert sorted(tr.snapshots) == list(snaps)
    for t, u in tr.snapshots.values():
        outside = grid.r > 1.0 + VEL.A(t) + 2 * dr
        assert np.max(np.abs(u[outside])) <= 1e-12 * np.max(np.abs(u))


@pytest.mark.parametrize("n", [1, 3])
def test_plateau_core_matches_ode(n):
    # r = 0 sees only the plateau until A(t) = r0/2
    t_inf = float(VEL.A_inv(0.5))
    assert t_inf == pytest.approx(0.5625)
    eps, f_amp, g_amp = 0.5, 1.0, 0.5
    grid = Grid.for_run(1.0, -0.5, t_inf, 1 / 256)
    snaps = tuple(np.linspace(0.05, t_inf, 12))
    tr, _ = run(params(eps=eps, n=n), InitialData(f_amp, g_amp, 1.0, "plateau_bump"), grid, t_inf,
                SolverConfig(snapshot_times=snaps))
    sol = solve_ivp(lambda t, y: [y[1], -0.5 / (1 + t) ** 2 * y[0] + y[0] ** 2], (0, t_inf),
                    [eps * f_amp, eps * g_amp], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    errs = [abs(u[0] - sol.sol(t)[0]) for t, u in tr.snapshots.values()]
    assert max(errs) <= 1e-4


def test_linear_mode_follows_oscillatory_profile():
    # without Laplacian and nonlinearity each node solves y'' + mu^2 (1+t)^{-2} y = 0
    omega = 2 * math.pi
    P = params(eps=1.0, mu2=omega**2 + 0.25)
    t_max = math.expm1(2 * 2 * math.pi / omega)
    grid = Grid.for_run(1.0, -0.5, t_max, 1 / 64)
    tr, _ = run(P, InitialData(), grid, t_max,
                SolverConfig(laplacian=False, nonlinear=False, dt=2e-4, sample_every=50))
    t = tr.times
    y = h(t, omega) - (1 + t) ** 0.5 * np.sin(omega * np.log1p(t)) / (2 * omega)
    # sup|u| = |y| since the bump peaks at 1
    assert np.max(np.abs(tr.sup_u - np.abs(y))) <= 1e-4


# functionals and blow-up

def test_zero_data_override_gives_zero_functionals(q_tables):
    tr = run(params(), InitialData(), Grid.for_run(1.0, -0.5, 2.0, 1 / 64), 2.0,
             SolverConfig(eps_override=0.0, sample_every=8), *q_tables)[0]
    assert tr.eps == 0.0
    for col in (tr.H, tr.F, tr.Q, tr.mass, tr.sup_u):
        assert np.all(col == 0)
    assert tr.status is Status.completed


def _initial_errors(n, dr, prof):
    eps, p = 0.2, 2
    P = params(eps=eps, n=n)
    grid = Grid.for_run(1.0, -0.5, 0.25, dr)
    ev = EigenfunctionEvaluator(n, 1.0)
    tr = run(P, InitialData(), grid, 0.25, SolverConfig(), prof, ev)[0]
    b = lambda r: float(smooth_bump(np.array([r]), 1.0)[0])
    H0 = sphere_area(n) * integrate.quad(lambda r: (eps * b(r)) ** p * r ** (n - 1), 0, 1, epsrel=1e-13)[0]
    F0 = sphere_area(n) * integrate.quad(lambda r: eps * b(r) * float(ev.phi(np.array(r))) * r ** (n - 1),
                                         0, 1, epsrel=1e-13)[0]
    return abs(tr.H[0] / H0 - 1), abs(tr.F[0] / F0 - 1), tr, P, grid, ev


def test_initial_functionals_against_quadrature(q_tables):
    prof = q_tables[0]
    # n = 1: the cell weights are the trapezoid rule, spectrally accurate on a compact smooth bump
    eH, eF, tr, P, grid, ev = _initial_errors(1, 1 / 256, prof)
    assert eH <= 1e-10 and eF <= 1e-10
    # n = 3: exact shell volumes times nodal values, second order
    coarse = _initial_errors(3, 1 / 256, prof)
    fine = _initial_errors(3, 1 / 512, prof)
    assert fine[0] <= 1e-5 and fine[1] <= 1e-5
    assert 3.5 <= coarse[0] / fine[0] <= 4.5
    assert 3.5 <= coarse[1] / fine[1] <= 4.5
    t, u, v = tr.final
    H, F, Q, mass = functionals((t, u, v, grid, P), prof, ev)
    assert (H, F, Q, mass) == pytest.approx((tr.H[-1], tr.F[-1], tr.Q[-1], tr.mass[-1]), rel=1e-12)


def test_functionals_need_both_tables(q_tables):
    grid = Grid(1 / 64, 3.0)
    u = np.zeros(grid.n_points)
    H, F, Q, mass = functionals((0.0, u, u, grid, params()))
    assert H == 0 and math.isnan(F) and math.isnan(Q)
    with pytest.raises(ConfigurationError):
        functionals((0.0, u, u, grid, params()), q_tables[0], None)


def test_blowup_detection_and_report():
    P = params(eps=0.5)
    t_max = 20.0
    grid = Grid.for_run(1.0, -0.5, t_max, 1 / 64)
    tr, rep = run(P, InitialData(), grid, t_max, SolverConfig(sample_every=4))
    assert tr.status is Status.blowup_detected and rep.detected
    assert 5.0 < rep.T_detect < 15.0
    assert rep.threshold == pytest.approx(1e6 * 0.5)
    assert 0 < rep.threshold_sensitivity < 1e-3
    assert tr.sup_u[-1] >= 10 * rep.threshold
    post = detect_blowup(tr, rep.threshold)
    assert post.detected and post.T_detect == pytest.approx(rep.T_detect, rel=1e-4)
    assert set(rep.as_dict()) >= {"detected", "T_detect", "threshold", "threshold_sensitivity"}
    assert not detect_blowup(tr, 1e30).detected


def test_small_data_survives_short_horizon():
    tr, rep = run(params(eps=0.01), InitialData(), Grid.for_run(1.0, -0.5, 5.0, 1 / 64), 5.0, SolverConfig())
    assert tr.status is Status.completed and not rep.detected
    assert tr.times[-1] == pytest.approx(5.0)


def test_run_errors(q_tables):
    P = params()
    grid = Grid.for_run(1.0, -0.5, 2.0, 1 / 64)
    with pytest.raises(ConfigurationError):
        run(P, InitialData(), grid, 2.0, SolverConfig(dt=2 / 64))
    with pytest.raises(ConfigurationError):
        run(P, InitialData(), Grid(1 / 64, 2.0), 2.0, SolverConfig())
    with pytest.raises(ConfigurationError):
        run(P, InitialData(), grid, 2.0, SolverConfig(), q_tables[0], None)
    short = build_profile(1.0, P, 1.0)
    with pytest.raises(ConfigurationError):
        run(P, InitialData(), grid, 2.0, SolverConfig(), short, q_tables[1])
