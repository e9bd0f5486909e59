"""Verification campaigns: monotone functional, lower bounds, weak-form identity,
shell bounds, the shell-upper integrals M_j and the lifespan sweep.

Each check takes a :class:`~tricomi_lab.simulator.SimTrace` (or pure
parameters) and returns a small report dataclass; nothing here asserts.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import math
import pathlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, interpolate

from .eigenfunction import sphere_area
from .errors import ConfigurationError, RegimeError
from .geometry import (CutoffSpec, VelocityModel, eta_weighted, h, h_prime, psi, psi_forcing,
                       psi_forcing_weighted, shell)
from .regime import ProblemParams, gamma_alpha, sigma_alpha
from .simulator import Grid, InitialData, SolverConfig, run


# ---------------------------------------------------------------- Q, F, H

@dataclass
class QReport:
    passed: bool
    monotone: bool
    first_violation: float
    c0: float
    data_integral: float
    c0_rel_error: float
    drift_rate: float
    scale: float


def data_integral(data: InitialData, adjoint, eigen, n: int) -> float:
    """``int (m(0) g - m'(0) f) phi dx`` for unit amplitude, by adaptive quadrature of the bump."""
    lm, ratio = adjoint.evaluate(np.array(0.0))
    m0, r0 = math.exp(float(lm)), float(ratio)

    def integrand(r):
        b = float(data.bump(np.array([r]))[0])
        return (data.g_amp + r0 * data.f_amp) * b * float(eigen.phi(np.array(r))) * r ** (n - 1)

    pts = np.linspace(0, data.r0, 9)
    val = sum(integrate.quad(integrand, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
              for a, b in zip(pts[:-1], pts[1:]))
    return m0 * sphere_area(n) * val


def q_identity_defect(trace) -> np.ndarray:
    """``Q(t) - Q(0) - int_0^t int m (1+s)^{-alpha} |u|^p phi``; zero for exact solutions."""
    acc = integrate.cumulative_trapezoid(trace.Q_source, trace.times, initial=0.0)
    return trace.Q - trace.Q[0] - acc


def verify_Q(trace, tol=1e-6) -> QReport:
    Q = trace.Q
    if np.any(np.isnan(Q)):
        raise ConfigurationError("trace carries no Q samples (run without adjoint/eigen tables)")
    scale = float(np.max(np.abs(Q)))
    if scale == 0:
        return QReport(True, True, math.nan, 0.0, 0.0, 0.0, 0.0, 0.0)
    inc = np.diff(Q)
    bad = np.nonzero((inc < -tol * scale) | (Q[1:] < Q[0] - tol * scale))[0]
    first = float(trace.times[bad[0] + 1]) if bad.size else math.nan
    d = q_identity_defect(trace)
    t = trace.times
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = float(np.max(np.where(t > 0, np.abs(d) / np.where(t > 0, t, 1), 0))) / scale
    c0 = float(Q[0] / trace.eps) if trace.eps else math.nan
    di = data_integral(trace.data, trace.adjoint, trace.eigen, trace.params.n)
    rel = abs(c0 - di) / abs(di) if trace.eps else math.nan
    return QReport(bool(bad.size == 0 and (not trace.eps or rel <= 0.01)), bool(bad.size == 0),
                   first, c0, di, rel, rate, scale)


def _log_A(trace):
    return VelocityModel(float(trace.params.ell)).A(trace.times)


@dataclass
class LowerBoundReport:
    passed: bool
    positive: bool
    t1: float
    min_ratio: float
    last_decade_min: float
    last_decade_median: float
    last_decade_spread: float
    ratio: np.ndarray = field(repr=False, default=None)


def verify_F_lower(trace, adjoint=None) -> LowerBoundReport:
    """``rho = F / (eps a^{-1/2} e^{lam A})`` over the run, in log form."""
    lam = float(adjoint.lam) if adjoint is not None else float(trace.lam)
    ell = float(trace.params.ell)
    t = trace.times
    F = trace.F
    with np.errstate(divide="ignore", invalid="ignore"):
        log_rho = np.log(F) - math.log(trace.eps) + 0.5 * ell * np.log1p(t) - lam * _log_A(trace)
    rho = np.exp(log_rho)
    positive = bool(np.all(F > 0))
    half = t >= 0.5 * t[-1]
    dec = t >= 0.1 * t[-1]
    med = float(np.median(rho[dec]))
    lmin = float(np.min(rho[dec]))
    passed = positive and float(np.min(rho[half])) > 0 and lmin >= 0.5 * med
    return LowerBoundReport(passed, positive, float(t[0]), float(np.min(rho)), lmin, med,
                            float(np.max(rho[dec]) / lmin) if lmin > 0 else math.inf, rho)


def verify_H_lower(trace, t1_candidates=None) -> LowerBoundReport:
    """``H / (eps^p (1+t)^{-l p/2} (1+A)^{-(n-1)(p-2)/2})``, with the start time t1 scanned."""
    P = trace.params
    n, ell, p = P.n, float(P.ell), float(P.p)
    t = trace.times
    A = _log_A(trace)
    ref = trace.eps**p * (1 + t) ** (-ell * p / 2) * (1 + A) ** (-(n - 1) * (p - 2) / 2)
    ratio = trace.H / ref
    if t1_candidates is None:
        t1_candidates = np.concatenate([[0.0], np.geomspace(0.1, max(t[-1] / 2, 0.2), 16)])
    t1 = math.nan
    for c in t1_candidates:
        s = t >= c
        if s.any() and np.all(ratio[s] > 0):
            t1 = float(c)
            break
    dec = t >= 0.1 * t[-1]
    lmin = float(np.min(ratio[dec]))
    med = float(np.median(ratio[dec]))
    positive = not math.isnan(t1)
    sel = t >= (t1 if positive else 0)
    return LowerBoundReport(positive, positive, t1, float(np.min(ratio[sel])), lmin, med,
                            float(np.max(ratio[dec]) / lmin) if lmin > 0 else math.inf, ratio)


# ---------------------------------------------------------------- shells

def _cutoff(params) -> CutoffSpec:
    return CutoffSpec.for_power(float(params.p))


def _inside(trace, lo, hi):
    t = trace.times
    return (t >= lo) & (t <= hi)


def test_function_identity(trace, j, scale=1.0, nodes=800) -> float:
    """Relative defect of ``int (1+t)^{-alpha} Psi_j H = int (Psi_j'' + mu^2 (1+t)^{-2} Psi_j) int u``."""
    P = trace.params
    g = shell(j, P.omega)
    if trace.times[-1] < g.S[1]:
        raise ConfigurationError(f"S_{j} = ({g.S[0]:.6g}, {g.S[1]:.6g}) not inside the run horizon")
    sel = _inside(trace, g.S[0], g.S[1])
    if sel.sum() < 50:
        raise ConfigurationError(f"only {int(sel.sum())} samples in S_{j}; sample more often")
    # the sampled integrals are smooth in t: spline them, then integrate
    # against the explicit Psi_j on Gauss nodes in the phase variable
    k = np.nonzero(sel)[0]
    win = slice(max(k[0] - 3, 0), min(k[-1] + 4, trace.times.size))
    tt = trace.times[win]
    mass = interpolate.CubicSpline(tt, trace.mass[win])
    nl = interpolate.CubicSpline(tt, trace.nonlinear_integral[win])
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.25 * math.pi * x
    t = g.t_of_sigma(s)
    dt = 0.25 * math.pi * w * (1 + t) / g.omega
    c = _cutoff(P)
    lhs = float(np.sum(dt * scale * psi(g, c, t) * nl(t)))
    rhs = float(np.sum(dt * scale * psi_forcing(g, c, t) * mass(t)))
    big = max(abs(lhs), abs(rhs))
    return 0.0 if big == 0 else abs(lhs - rhs) / big


@dataclass
class ShellCheck:
    j: int
    L_j: float
    lower_expr: float
    upper_expr: float
    c_fit: float
    C_fit: float
    partial: bool = False


def shell_exprs(params, j, eps=None):
    """``(lower_expr, upper_expr)`` of the shell bounds."""
    n, ell, p, alpha = params.n, float(params.ell), float(params.p), float(params.alpha)
    eps = float(params.eps) if eps is None else eps
    pc = p / (p - 1)
    R = shell(j, params.omega).R
    AR = float(VelocityModel(ell).A(R))
    lower = eps**p * R ** (1 - alpha - ell * p / 2) * (1 + AR) ** (-(n - 1) * (p - 2) / 2)
    upper = R ** (1 - 2 * pc + alpha / (p - 1)) * (1 + AR) ** n
    return lower, upper


def shell_check(trace, j, params=None) -> ShellCheck:
    P = params or trace.params
    g = shell(j, P.omega)
    t_end = float(trace.times[-1])
    partial = t_end < g.I[1]
    if partial and trace.status.value != "blowup_detected":
        raise ConfigurationError(f"I_{j} extends past the run horizon")
    hi = min(g.I[1], t_end)
    sel = _inside(trace, g.I[0], hi)
    w = (1 + trace.times) ** (-float(P.alpha)) * trace.H
    t = np.concatenate([[g.I[0]], trace.times[sel], [hi]])
    y = np.concatenate([[np.interp(g.I[0], trace.times, w)], w[sel], [np.interp(hi, trace.times, w)]])
    L = float(integrate.trapezoid(y, t)) if hi > g.I[0] else 0.0
    lower, upper = shell_exprs(P, j, trace.eps)
    return ShellCheck(j, L, lower, upper, L / lower, L / upper, partial)


@dataclass
class MjDiagnostics:
    j: int
    R: float
    M_total: float
    M_1: float
    M_2: float
    scale: float  # R^e (1+A(R))^n with the predicted exponent e


def mj_exponent(params) -> float:
    p, alpha = float(params.p), float(params.alpha)
    pc = p / (p - 1)
    return -1 / (2 * (p - 1)) + 1 + alpha / (p - 1) - 1.5 * pc


def mj_diagnostics(j, params, nodes=400) -> MjDiagnostics:
    """Quadrature of the three shell integrals in the phase variable ``sigma_j``."""
    n, ell, p, alpha = params.n, float(params.ell), float(params.p), float(params.alpha)
    pc = p / (p - 1)
    g = shell(j, params.omega)
    c = CutoffSpec.for_power(p)
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.25 * math.pi * x
    t = g.t_of_sigma(s)
    dt = 0.25 * math.pi * w * (1 + t) / g.omega
    A = VelocityModel(ell).A(t)
    common = (1 + t) ** (alpha / (p - 1)) * (1 + A) ** n
    hv = h(t, g.omega)
    W1, W2 = eta_weighted(g, c, p, t)
    m1 = float(np.sum(dt * common * np.abs(h_prime(t, g.omega)) ** pc * hv ** (-1 / (p - 1)) * W1))
    m2 = float(np.sum(dt * common * hv ** (pc - 1 / (p - 1)) * W2))
    mt = float(np.sum(dt * common * hv ** (-1 / (p - 1)) * psi_forcing_weighted(g, c, p, t)))
    AR = float(VelocityModel(ell).A(g.R))
    return MjDiagnostics(j, g.R, mt, m1, m2, g.R ** mj_exponent(params) * (1 + AR) ** n)


@dataclass
class MjSlopes:
    predicted: float
    slope_total: float
    slope_1: float
    slope_2: float
    rows: list
    slope_total_shifted: float = math.nan  # against log(1 + R_j); equal asymptotically

    def max_rel_error(self) -> float:
        e = self.predicted
        return max(abs(s - e) / abs(e) for s in (self.slope_total, self.slope_1, self.slope_2))


def mj_slopes(params, js=(1, 2, 3, 4)) -> MjSlopes:
    """Log-log slopes of ``M / (1+A(R_j))^n`` against ``R_j``."""
    rows = [mj_diagnostics(j, params) for j in js]
    n, ell = params.n, float(params.ell)
    lr = np.log([r.R for r in rows])
    base = np.array([n * math.log1p(float(VelocityModel(ell).A(r.R))) for r in rows])
    fit = lambda vals: float(np.polyfit(lr, np.log(vals) - base, 1)[0])
    shifted = float(np.polyfit(np.log1p([r.R for r in rows]), np.log([r.M_total for r in rows]) - base, 1)[0])
    return MjSlopes(mj_exponent(params), fit([r.M_total for r in rows]), fit([r.M_1 for r in rows]),
                    fit([r.M_2 for r in rows]), rows, shifted)


def theta_direct(n, ell, alpha, p):
    """Combined shell exponent assembled term by term (no reference to gamma)."""
    pc = p / (p - 1)
    return (1 - 2 * pc + alpha / (p - 1) - (1 - alpha - ell * p / 2)
            + (1 + ell) * (n + (n - 1) * (p - 2) / 2))


# ---------------------------------------------------------------- lifespan

@dataclass(frozen=True)
class HorizonRule:
    """``t_max(eps) = c * eps^{power * sigma}``."""

    sigma: float
    c: float = 20.0
    power: float = 1.5

    def __call__(self, eps):
        return self.c * eps ** (self.power * self.sigma)


@dataclass
class LifespanFit:
    samples: list  # (eps, T_detect, T_detect at 10x threshold)
    slope: float
    predicted: float
    residual: float
    threshold_sensitivity: float  # relative slope shift at 10x threshold
    slope_10x: float = math.nan
    used: int = 0
    inconclusive: bool = False
    monotone: bool = True
    t_min: float = 5.0

    @property
    def rel_error(self) -> float:
        return abs(self.slope - self.predicted) / abs(self.predicted)


def _lifespan_job(args):
    params, data, dr, t_max, cfg = args
    grid = Grid.for_run(data.r0, float(params.ell), t_max, dr)
    _, rep = run(params, data, grid, t_max, cfg)
    return rep.as_dict()


def lifespan_sweep(params, eps_list, horizon_rule: Optional[Callable] = None, data: Optional[InitialData] = None,
                   dr=1 / 32, solver_cfg: Optional[SolverConfig] = None, t_min=5.0, workers=1,
                   store: Optional["ResultsStore"] = None) -> LifespanFit:
    """Run one blow-up detection per eps and fit ``log T`` against ``log eps``.

    Only detections with ``T_detect >= t_min`` enter the fit.
    """
    gamma = gamma_alpha(params.n, params.ell, params.alpha, params.p)
    if not gamma < 0:
        raise RegimeError("lifespan sweep needs gamma_alpha < 0")
    eps_list = sorted(float(e) for e in eps_list)
    if len(eps_list) < 5 or eps_list[-1] / eps_list[0] < 10 * (1 - 1e-12):
        raise ConfigurationError("need at least 5 eps values spanning one decade")
    sig = float(sigma_alpha(params.n, params.ell, params.alpha, params.p))
    rule = horizon_rule or HorizonRule(sig)
    data = data or InitialData()
    cfg = solver_cfg or SolverConfig(sample_every=50)
    jobs = [(params.with_eps(e), data, dr, float(rule(e)), cfg) for e in eps_list]

    results = [None] * len(jobs)
    todo = []
    for k, job in enumerate(jobs):
        key = _job_config(job)
        hit = store.load(key) if store is not None else None
        if hit is not None:
            results[k] = hit[0]
        else:
            todo.append(k)
    if workers > 1 and len(todo) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            for k, rep in zip(todo, ex.map(_lifespan_job, [jobs[k] for k in todo])):
                results[k] = rep
    else:
        for k in todo:
            results[k] = _lifespan_job(jobs[k])
    if store is not None:
        for k in todo:
            store.save(_job_config(jobs[k]), results[k])

    samples = [(e, r["T_detect"], r["T_detect_sensitivity"]) for e, r in zip(eps_list, results)]
    det = [(e, T, T2) for e, T, T2 in samples if r_ok(T) and T >= t_min]
    Ts = [T for _, T, _ in samples if r_ok(T)]
    monotone = all(a >= b for a, b in zip(Ts[:-1], Ts[1:]))
    if len(det) < 3:
        return LifespanFit(samples, math.nan, sig, math.nan, math.nan, used=len(det),
                           inconclusive=True, monotone=monotone, t_min=t_min)
    le = np.log([d[0] for d in det])
    lT = np.log([d[1] for d in det])
    coef, res, *_ = np.polyfit(le, lT, 1, full=True)
    slope = float(coef[0])
    resid = float(np.sqrt(res[0] / len(det))) if len(res) else 0.0
    T2 = [d[2] for d in det]
    if all(r_ok(x) for x in T2):
        slope2 = float(np.polyfit(le, np.log(T2), 1)[0])
        sens = abs(slope2 - slope) / abs(slope)
    else:
        slope2 = sens = math.nan
    return LifespanFit(samples, slope, sig, resid, sens, slope2, len(det), False, monotone, t_min)


def r_ok(x) -> bool:
    return x is not None and not (isinstance(x, float) and math.isnan(x))


def _job_config(job) -> dict:
    params, data, dr, t_max, cfg = job
    c = {k: v for k, v in asdict(cfg).items() if k != "source"}
    return {"kind": "lifespan_run", "params": params.as_dict(), "data": {**asdict(data), "shape": data.shape.value},
            "dr": dr, "t_max": t_max, "solver": c}


# ---------------------------------------------------------------- storage

def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "value"):
        return obj.value
    return obj


def config_hash(config: dict) -> str:
    raw = json.dumps(_canonical(config), sort_keys=True, default=str)
    return hashlib.sha256(raw.encode()).hexdigest()[:20]


class ResultsStore:
    """Content-addressed directory: one subdirectory per configuration hash."""

    def __init__(self, root):
        self.root = pathlib.Path(root)

    def path(self, config: dict) -> pathlib.Path:
        return self.root / config_hash(config)

    def save(self, config: dict, summary: dict, columns: Optional[dict] = None):
        d = self.path(config)
        d.mkdir(parents=True, exist_ok=True)
        (d / "config.json").write_text(json.dumps(_canonical(config), indent=1, default=str))
        if columns is not None:
            write_csv(d / "trace.csv", columns)
        (d / "summary.json").write_text(json.dumps(_canonical(summary), indent=1, default=str))
        return d

    def load(self, config: dict):
        d = self.path(config)
        s = d / "summary.json"
        if not s.exists():
            return None
        summary = json.loads(s.read_text())
        cols = read_csv(d / "trace.csv") if (d / "trace.csv").exists() else None
        return summary, cols


def write_csv(path, columns: dict):
    keys = list(columns)
    arrs = [np.atleast_1d(np.asarray(columns[k])) for k in keys]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in zip(*arrs):
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    keys = rows[0]
    data = np.array(rows[1:], dtype=float).reshape(-1, len(keys))
    return {k: data[:, i] for i, k in enumerate(keys)}
