"""Radial solver for ``u_tt - (1+t)^{2l} Lap u + mu^2 (1+t)^{-2} u = (1+t)^{-alpha} |u|^p``.

Space: conservative finite volumes on ``r_i = i dr``.  Cell ``i`` is the
shell ``[r_{i-1/2}, r_{i+1/2}]`` (``[0, dr/2]`` at the origin) and

    (Lap u)_i = (S_{i+1/2} (u_{i+1} - u_i) - S_{i-1/2} (u_i - u_{i-1})) / (dr V_i),

with ``S = r^{n-1}`` and ``V_i`` the exact shell volume divided by
``|S^{n-1}|``.  At the origin this is ``2n (u_1 - u_0)/dr^2``, the even
reflection of ``n u_rr(0)``.  The operator is symmetric for the weights
``V_i``, which makes discrete integrals ``sum_i V_i (.)`` obey the same
integration-by-parts identities as the continuum ones.  The outer node is
held at zero; runs are sized so the support never gets near it.

Time: velocity-form leapfrog (kick-drift-kick), fixed ``dt = c_cfl dr / a(0)``.
Close to blow-up the step is halved whenever ``dt^2 p |u|^{p-1}`` exceeds
a bound, and the crossing of the detection threshold is located by
bisection of the last step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .eigenfunction import EigenfunctionEvaluator, sphere_area
from .errors import ConfigurationError, DomainError, NumericalError
from .geometry import VelocityModel, _smooth_step


class Shape(str, enum.Enum):
    smooth_bump = "smooth_bump"
    plateau_bump = "plateau_bump"


def smooth_bump(r, r0):
    """``exp(1 - 1/(1 - (r/r0)^2))`` inside ``r0``; equals 1 at the center."""
    x = np.asarray(r, dtype=float) / r0
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1 - 1 / (1 - x[inside] ** 2))
    return out


def plateau_bump(r, r0):
    """1 on ``[0, r0/2]``, smooth descent to 0 at ``r0``."""
    r = np.asarray(r, dtype=float)
    return _smooth_step((r0 - np.abs(r)) / (0.5 * r0))[0]


@dataclass(frozen=True)
class InitialData:
    """``f = f_amp * bump``, ``g = g_amp * bump``; the solver multiplies both by eps."""

    f_amp: float = 1.0
    g_amp: float = 0.0
    r0: float = 1.0
    shape: Shape = Shape.smooth_bump

    def __post_init__(self):
        if self.f_amp < 0 or self.g_amp < 0:
            raise DomainError("amplitudes must be nonnegative")
        if not self.r0 > 0:
            raise DomainError("r0 must be positive")
        if self.f_amp == 0 and self.g_amp == 0:
            raise DomainError("(f, g) must not both vanish")
        object.__setattr__(self, "shape", Shape(self.shape))

    def bump(self, r):
        if self.shape is Shape.smooth_bump:
            return smooth_bump(r, self.r0)
        return plateau_bump(r, self.r0)


@dataclass(frozen=True)
class Grid:
    dr: float
    r_max: float

    def __post_init__(self):
        if not self.dr > 0 or not self.r_max > self.dr:
            raise DomainError("need 0 < dr < r_max")

    @property
    def n_points(self) -> int:
        return int(round(self.r_max / self.dr)) + 1

    @property
    def r(self) -> np.ndarray:
        return self.dr * np.arange(self.n_points)

    @classmethod
    def for_run(cls, r0, ell, t_max, dr, margin=0.5) -> "Grid":
        """Grid reaching ``margin`` (at least 12 cells) past the light cone at t_max.

        The margin absorbs the small dispersive precursor of the discrete
        solution ahead of the exact cone.
        """
        reach = r0 + float(VelocityModel(ell).A(t_max))
        cells = int(math.ceil(reach / dr)) + max(12, int(math.ceil(margin / dr)))
        return cls(dr, cells * dr)

    def volumes(self, n) -> np.ndarray:
        """Cell volumes divided by ``|S^{n-1}|``."""
        r = self.r
        hi = np.minimum(r + 0.5 * self.dr, self.r_max)
        lo = np.maximum(r - 0.5 * self.dr, 0.0)
        return (hi**n - lo**n) / n


def make_data(spec: InitialData, grid: Grid):
    """Sampled ``(f, g)`` on the grid."""
    if spec.r0 / grid.dr < 32:
        raise ConfigurationError(f"r0 = {spec.r0} resolved by fewer than 32 cells (dr = {grid.dr})")
    b = spec.bump(grid.r)
    return spec.f_amp * b, spec.g_amp * b


class RadialLaplacian:
    def __init__(self, grid: Grid, n: int):
        dr = grid.dr
        r = grid.r
        V = grid.volumes(n)
        face_hi = (r + 0.5 * dr) ** (n - 1)
        face_lo = np.where(r > 0, (r - 0.5 * dr) ** (n - 1), 0.0)
        self.V = V
        self.cp = face_hi / (dr * V)
        self.cm = face_lo / (dr * V)
        self.c0 = -(self.cp + self.cm)

    def __call__(self, u, out=None):
        out = np.empty_like(u) if out is None else out
        out[0] = self.c0[0] * u[0] + self.cp[0] * u[1]
        out[1:-1] = self.cm[1:-1] * u[:-2] + self.c0[1:-1] * u[1:-1] + self.cp[1:-1] * u[2:]
        out[-1] = 0.0
        return out


@dataclass(frozen=True)
class SolverConfig:
    c_cfl: float = 0.5
    dt: Optional[float] = None
    sample_every: int = 1
    threshold: Optional[float] = None
    threshold_factor: float = 1e6
    sensitivity_factor: float = 10.0
    nonlinear: bool = True
    laplacian: bool = True
    source: Optional[Callable] = None
    eps_override: Optional[float] = None
    stiffness_bound: float = 0.02
    max_halvings: int = 60
    snapshot_times: tuple = ()
    support_rel: float = 1e-12
    boundary_rel: float = 1e-8


class Status(str, enum.Enum):
    completed = "completed"
    blowup_detected = "blowup_detected"
    cfl_exhausted = "cfl_exhausted"


@dataclass
class BlowupReport:
    detected: bool
    T_detect: float = math.nan
    threshold: float = math.nan
    threshold_sensitivity: float = math.nan
    T_detect_sensitivity: float = math.nan

    def as_dict(self) -> dict:
        return {"detected": self.detected, "T_detect": self.T_detect, "threshold": self.threshold,
                "threshold_sensitivity": self.threshold_sensitivity,
                "T_detect_sensitivity": self.T_detect_sensitivity}


@dataclass
class SimTrace:
    times: np.ndarray
    H: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    mass: np.ndarray
    nonlinear_integral: np.ndarray  # int (1+t)^{-alpha} |u|^p
    Q_source: np.ndarray  # int m (1+t)^{-alpha} |u|^p phi
    sup_u: np.ndarray
    support_radius: np.ndarray
    status: Status
    eps: float
    params: object
    grid: Grid
    data: InitialData
    dt: float
    lam: float = math.nan
    snapshots: dict = field(default_factory=dict)
    final: tuple = ()
    adjoint: object = None
    eigen: object = None

    def columns(self) -> dict:
        return {"t": self.times, "H": self.H, "F": self.F, "Q": self.Q, "sup_u": self.sup_u,
                "support_radius": self.support_radius, "mass": self.mass,
                "nonlinear_integral": self.nonlinear_integral, "Q_source": self.Q_source}


def _abs_pow(u, p):
    a = np.abs(u)
    if float(p) == 2.0:
        return a * a
    return a ** p


def functionals(state, adjoint=None, eigen: Optional[EigenfunctionEvaluator] = None) -> tuple:
    """``(H, F, Q, mass)`` for ``state = (t, u, v, grid, params)``.

    F and Q need both the adjoint profile and the eigenfunction.
    """
    t, u, v, grid, params = state
    n = params.n
    V = sphere_area(n) * grid.volumes(n)
    H = float(np.sum(V * _abs_pow(u, float(params.p))))
    mass = float(np.sum(V * u))
    if adjoint is None or eigen is None:
        if adjoint is not None or eigen is not None:
            raise ConfigurationError("F and Q need both the adjoint profile and the eigenfunction")
        return H, math.nan, math.nan, mass
    log_phi = eigen.log_phi(grid.r)
    lm, ratio = adjoint.evaluate(np.array(float(t)))
    w = V * np.exp(log_phi)
    F = float(np.sum(w * u))
    Q = float(np.exp(lm) * np.sum(w * (v + ratio * u)))
    return H, F, Q, mass


def run(params, data: InitialData, grid: Grid, t_max: float, solver_cfg: SolverConfig = SolverConfig(),
        adjoint=None, eigen: Optional[EigenfunctionEvaluator] = None):
    """Integrate to ``t_max``, the blow-up threshold, or failure.

    Returns ``(SimTrace, BlowupReport)``.  After the detection threshold is
    crossed the run continues to ``sensitivity_factor`` times the threshold so
    that the report carries the threshold sensitivity of ``T_detect``.
    """
    cfg = solver_cfg
    params.require_simulation_range()
    n, ell, mu2 = params.n, float(params.ell), float(params.mu2)
    alpha, p = float(params.alpha), float(params.p)
    eps = float(params.eps) if cfg.eps_override is None else float(cfg.eps_override)
    vel = VelocityModel(ell)
    reach = data.r0 + float(vel.A(t_max))
    if grid.r_max < reach + 10 * grid.dr:
        raise ConfigurationError(
            f"r_max = {grid.r_max:.6g} below r0 + A(t_max) + 10 dr = {reach + 10 * grid.dr:.6g}")
    if (adjoint is None) != (eigen is None):
        raise ConfigurationError("F and Q need both the adjoint profile and the eigenfunction")
    if adjoint is not None and adjoint.t_max < t_max * (1 - 1e-12):
        raise ConfigurationError("adjoint profile does not cover the horizon")

    f, g = make_data(data, grid)
    u = eps * f
    v = eps * g
    r = grid.r
    lap = RadialLaplacian(grid, n)
    Vw = sphere_area(n) * lap.V
    dt_cfl = cfg.c_cfl * grid.dr / float(vel.a(0.0))
    dt = dt_cfl if cfg.dt is None else float(cfg.dt)
    if cfg.laplacian and dt > grid.dr * 0.999:
        raise ConfigurationError(f"dt = {dt:.3g} violates the CFL limit dr = {grid.dr:.3g}")
    scale0 = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))))
    threshold = cfg.threshold if cfg.threshold is not None else cfg.threshold_factor * max(scale0, 1e-300)
    threshold2 = cfg.sensitivity_factor * threshold

    have_fq = adjoint is not None
    weight_phi = None
    if have_fq:
        log_phi = eigen.log_phi(r)
        lam = float(adjoint.lam)
    else:
        lam = math.nan

    work = np.empty_like(u)

    def accel(t, u):
        out = lap(u, work).copy() * (1 + t) ** (2 * ell) if cfg.laplacian else np.zeros_like(u)
        out -= mu2 / (1 + t) ** 2 * u
        if cfg.nonlinear:
            out += (1 + t) ** (-alpha) * _abs_pow(u, p)
        if cfg.source is not None:
            out += cfg.source(t, r)
        out[-1] = 0.0
        return out

    rows = []
    snapshots = {}
    snap_times = sorted(float(s) for s in cfg.snapshot_times)

    def record(t, u, v):
        a_up = _abs_pow(u, p)
        sup = float(np.max(np.abs(u)))
        H = float(np.sum(Vw * a_up))
        N = (1 + t) ** (-alpha) * H
        mass = float(np.sum(Vw * u))
        big = np.nonzero(np.abs(u) > cfg.support_rel * sup)[0] if sup > 0 else np.array([], int)
        supp = float(r[big[-1]]) if big.size else 0.0
        if have_fq:
            lm, rat = adjoint.evaluate(np.array(t))
            w = Vw * np.exp(log_phi + float(lm))
            F = float(np.sum(Vw * np.exp(log_phi) * u))
            Q = float(np.sum(w * (v + float(rat) * u)))
            QN = float(np.sum(w * a_up)) * (1 + t) ** (-alpha)
        else:
            F = Q = QN = math.nan
        rows.append((t, H, F, Q, mass, N, QN, sup, supp))
        return sup, supp

    def finish(status, report):
        arr = np.array(rows, dtype=float).reshape(-1, 9)
        cols = [arr[:, k] for k in range(9)]
        trace = SimTrace(cols[0], cols[1], cols[2], cols[3], cols[4], cols[5], cols[6], cols[7], cols[8],
                         status, eps, params, grid, data, dt, lam, snapshots, (t, u.copy(), v.copy()),
                         adjoint, eigen)
        return trace, report

    t = 0.0
    acc = accel(t, u)
    record(t, u, v)
    step = 0
    halvings = 0
    crossed = None
    last_good = (t, u.copy(), v.copy())
    edge = grid.r_max - 5 * grid.dr

    def advance(t, u, v, acc, h):
        vh = v + 0.5 * h * acc
        un = u + h * vh
        an = accel(t + h, un)
        return un, vh + 0.5 * h * an, an

    def crossing_time(t, u, v, acc, h, level):
        lo, hi = 0.0, h
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            um, _, _ = advance(t, u, v, acc, mid)
            if np.max(np.abs(um)) >= level:
                hi = mid
            else:
                lo = mid
        return t + 0.5 * (lo + hi)

    while t < t_max * (1 - 1e-14):
        h = min(dt, t_max - t)
        sup = float(np.max(np.abs(u)))
        if cfg.nonlinear and p > 1:
            while h * h * p * sup ** (p - 1) > cfg.stiffness_bound:
                h *= 0.5
                halvings = max(halvings, int(round(math.log2(dt / h))))
                if halvings > cfg.max_halvings:
                    report = BlowupReport(crossed is not None, crossed or math.nan, threshold)
                    return finish(Status.cfl_exhausted, report)
        un, vn, an = advance(t, u, v, acc, h)
        tn = t + h
        if not (np.all(np.isfinite(un)) and np.all(np.isfinite(vn))):
            if crossed is not None:
                report = BlowupReport(True, crossed, threshold, math.nan)
                return finish(Status.blowup_detected, report)
            raise NumericalError(f"nonfinite state at t = {tn:.6g}",
                                 {"t": last_good[0], "u": last_good[1], "v": last_good[2]})
        supn = float(np.max(np.abs(un)))
        if crossed is None and supn >= threshold:
            crossed = crossing_time(t, u, v, acc, h, threshold)
        if crossed is not None and supn >= threshold2:
            T2 = crossing_time(t, u, v, acc, h, threshold2)
            t, u, v, acc = tn, un, vn, an
            record(t, u, v)
            report = BlowupReport(True, crossed, threshold, (T2 - crossed) / crossed, T2)
            return finish(Status.blowup_detected, report)
        for s in snap_times:
            if t < s <= tn:
                snapshots[s] = (tn, un.copy())
        t, u, v, acc = tn, un, vn, an
        step += 1
        last_good = (t, u, v)
        if step % cfg.sample_every == 0 or crossed is not None or t >= t_max * (1 - 1e-14) or h < dt:
            sup, _ = record(t, u, v)
            if np.max(np.abs(u[r > edge])) > cfg.boundary_rel * sup:
                raise ConfigurationError(f"support reached the outer boundary at t = {t:.6g}")
    if crossed is not None:
        return finish(Status.blowup_detected, BlowupReport(True, crossed, threshold, math.nan))
    return finish(Status.completed, BlowupReport(False, math.nan, threshold))


def detect_blowup(trace: SimTrace, threshold: float, sensitivity_factor=10.0) -> BlowupReport:
    """First crossing of ``sup|u| >= threshold`` along the samples, interpolated in log sup|u|.

    The sensitivity uses the crossing of ``sensitivity_factor * threshold``
    when the trace reaches it.
    """
    def cross(level):
        s = trace.sup_u
        k = np.nonzero(s >= level)[0]
        if k.size == 0:
            return math.nan
        k = int(k[0])
        if k == 0:
            return float(trace.times[0])
        l0, l1 = math.log(max(s[k - 1], 1e-300)), math.log(s[k])
        w = (math.log(level) - l0) / (l1 - l0) if l1 > l0 else 1.0
        return float(trace.times[k - 1] + w * (trace.times[k] - trace.times[k - 1]))

    T1 = cross(threshold)
    if math.isnan(T1):
        return BlowupReport(False, math.nan, threshold)
    T2 = cross(sensitivity_factor * threshold)
    sens = (T2 - T1) / T1 if not math.isnan(T2) else math.nan
    return BlowupReport(True, T1, threshold, sens, T2)
