"""Command line front end.

Every subcommand reads an optional flat ``key = value`` config file, applies
``--set key=value`` overrides, writes CSV tables plus ``summary.txt`` into the
output directory and exits nonzero iff a mandatory check fails (1) or the
configuration is invalid (2).
"""

from __future__ import annotations

import argparse
import math
import pathlib
import sys
from fractions import Fraction

import numpy as np

from . import adjoint as adj
from .eigenfunction import EigenfunctionEvaluator
from .errors import ConfigurationError, DomainError, NumericalError, RegimeError
from .experiments import (HorizonRule, ResultsStore, lifespan_sweep, mj_slopes, shell_check,
                          test_function_identity, verify_F_lower, verify_H_lower, verify_Q, write_csv)
from .geometry import ShellFamily, shell
from .regime import ProblemParams, classify, epdt_reduce, sigma_alpha
from .simulator import Grid, InitialData, Shape, SolverConfig, run

DEFAULTS = {
    "n": 1, "ell": Fraction(-1, 2), "mu2": Fraction(1, 2), "alpha": 0, "p": 2, "eps": 0.1, "beta": None,
    "lam": None, "t_max": 10.0, "dr": 1 / 64, "r0": 1.0, "f_amp": 1.0, "g_amp": 0.0, "shape": "smooth_bump",
    "c_cfl": 0.5, "sample_every": 1, "threshold_factor": 1e6, "adjoint_tables": 1, "snapshots": None,
    "r_max": 20.0, "rho_max": 20.0, "h": 1e-2,
    "shell_j": (1, 2), "mj_j": (1, 2, 3, 4), "shell_run": 1, "mj_mandatory": 1, "identity_tol": 0.02, "mj_tol": 0.05,
    "eps_min": 0.05, "eps_max": 0.5, "eps_count": 6, "horizon_c": 20.0, "t_min": 5.0, "workers": 1,
    "slope_tol": 0.3, "sensitivity_tol": 0.1,
    "out": "tricomi_out", "store": None,
}

# Oscillation frequency 2 pi puts the first two shells at t < 8.
SHELL_PRESET = {"n": 1, "ell": Fraction(-1, 2), "mu2": 4 * math.pi**2 + 0.25, "alpha": 2, "p": 3,
                "eps": 0.3, "dr": 1 / 128, "t_max": 7.5, "mj_mandatory": 0}


def parse_value(text: str):
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    if "," in text:
        return tuple(parse_value(x) for x in text.split(",") if x.strip())
    for conv in (int, Fraction, float):
        try:
            return conv(text)
        except (ValueError, ZeroDivisionError):
            pass
    return text


def load_config(path=None, overrides=(), base=None) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(base or {})
    pairs = []
    if path is not None:
        for k, line in enumerate(pathlib.Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{k}: expected key = value")
            pairs.append(line.split("=", 1))
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r}: expected key=value")
        pairs.append(item.split("=", 1))
    for key, value in pairs:
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigurationError(f"unknown config key {key!r}")
        cfg[key] = parse_value(value)
    return cfg


def _num(v):
    return v if isinstance(v, (int, Fraction)) else float(v)


def params_from(cfg) -> ProblemParams:
    n, ell, mu2, p, eps = int(cfg["n"]), _num(cfg["ell"]), _num(cfg["mu2"]), _num(cfg["p"]), float(cfg["eps"])
    if cfg["beta"] is not None:
        return epdt_reduce(n, ell, _num(cfg["beta"]), mu2, p, eps)
    return ProblemParams(n=n, ell=ell, mu2=mu2, alpha=_num(cfg["alpha"]), p=p, eps=eps)


def _lam(cfg, params):
    return float(cfg["lam"]) if cfg["lam"] is not None else adj.default_lambda(float(params.mu2))


def _tuple(v):
    return tuple(v) if isinstance(v, tuple) else (v,)


class Report:
    """Collects summary lines and mandatory checks for one subcommand."""

    def __init__(self, name, out):
        self.name = name
        self.out = pathlib.Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.lines = []
        self.failed = []

    def text(self, line):
        self.lines.append(line)

    def info(self, key, value):
        self.lines.append(f"{key}: {value}")

    def check(self, key, ok, detail=""):
        ok = bool(ok)
        self.lines.append(f"[{'PASS' if ok else 'FAIL'}] {key} {detail}".rstrip())
        if not ok:
            self.failed.append(key)

    def csv(self, name, columns):
        write_csv(self.out / name, columns)

    def finish(self) -> int:
        text = "\n".join([f"== {self.name} =="] + self.lines) + "\n"
        (self.out / "summary.txt").write_text(text)
        print(text, end="")
        return 1 if self.failed else 0


def cmd_classify(cfg, rep: Report):
    params = params_from(cfg)
    r = classify(params)
    for line in r.describe().splitlines():
        rep.text(line)
    rows = [ln.split("=", 1) for ln in r.as_record().splitlines()]
    with open(rep.out / "classify.csv", "w") as fh:
        fh.write("key,value\n" + "".join(f"{k},{v}\n" for k, v in rows))


def cmd_adjoint(cfg, rep: Report):
    params = params_from(cfg)
    lam = _lam(cfg, params)
    t_max = float(cfg["t_max"])
    sol = adj.solve_riccati(lam, params, t_max)
    prof = adj.build_profile(lam, params, t_max, riccati=sol)
    if cfg["store"]:
        prof.save(pathlib.Path(cfg["store"]) / f"adjoint_{adj.profile_cache_key(lam, params, t_max, adj.AdjointGrid())}.npz")
    rep.info("lambda", lam)
    rep.info("contraction time T", sol.T)
    ratios = sol.contraction_ratios
    rmax = float(np.max(ratios)) if len(ratios) else 0.0
    rep.check("picard contraction <= 0.5", rmax <= 0.5, f"(max ratio {rmax:.3g})")
    rep.check("invariant ball", sol.ball_ok)
    t = prof.t_grid
    inner = t[(t >= 0.01) & (t + 2e-3 * (1 + t) <= t_max)]
    res = float(np.max(prof.ode_residual(inner)))
    rep.info("ODE residual (stencil)", f"{res:.3g}")
    m, mp = prof.m, prof.m_prime
    rep.check("m > 0 and m' < 0", np.all(m > 0) and np.all(mp < 0))
    P = prof.P()
    # P < 0, so P increasing means log|P| decreasing
    rep.check("P = m m' strictly increasing", np.all(np.diff(P) < 0))
    oracle = adj.oracle_direct(lam, params, t_max)
    agree = adj.compare_profiles(prof, oracle)
    rep.check("Riccati vs backward oracle <= 1e-4", agree <= 1e-4, f"({agree:.3g})")
    b = adj.verify_bounds(prof)
    for k, v in b.summary().items():
        rep.info(k, v)
    for tt in (1.0, 5.0, 20.0):
        b2, b4 = adj.kernel_bounds(tt, lam, float(params.ell))
        k2 = adj.kernel_integral(tt, lam, float(params.ell), 2)
        k4 = adj.kernel_integral(tt, lam, float(params.ell), 2 * float(params.ell) + 4)
        rep.check(f"kernel bounds t={tt:g}", k2 <= b2 and k4 <= b4, f"({k2:.4g} <= {b2:.4g}, {k4:.4g} <= {b4:.4g})")
    rm, rp = adj.bound_ratios(prof)
    ode = np.full(t.shape, np.nan)
    sel = (t >= 0.01) & (t + 2e-3 * (1 + t) <= t_max)
    ode[sel] = prof.ode_residual(t[sel])
    rep.csv("adjoint.csv", {"t": t, "m": prof.m, "m_prime": prof.m_prime, "ratio_lower_bound": rm,
                            "ratio_upper_bound": rp, "ode_residual": ode, "log_m": prof.log_m})
    rep.csv("adjoint_P.csv", {"t": t, "log_abs_P": P})


def cmd_eigen(cfg, rep: Report):
    n, lam = int(cfg["n"]), float(cfg["lam"] if cfg["lam"] is not None else 1.0)
    ev = EigenfunctionEvaluator(n, lam)
    r_max, h = float(cfg["r_max"]), float(cfg["h"])
    r = np.linspace(0, min(r_max, 5.0), 201)
    e1, e2 = ev.eigen_residual(r, h=h), ev.eigen_residual(r, h=h / 2)
    order = e1 / e2
    rep.check("stencil residual order in [3.5, 4.5]", 3.5 <= order <= 4.5, f"(ratio {order:.4g})")
    rep.info("analytic residual", f"{ev.eigen_residual(r, method='analytic'):.3g}")
    b1, b2 = ev.pointwise_bound_ratio(r_max / 2), ev.pointwise_bound_ratio(r_max)
    drift = abs(b2 - b1) / b1
    rep.check("pointwise bound ratio drift <= 5%", drift <= 0.05, f"({drift:.3g})")
    rho = np.linspace(1, float(cfg["rho_max"]), 20)
    lp = [ev.lp_ball_norm(x, float(cfg["p"])).ratio for x in rho]
    rep.info("Lp ratio range", f"[{min(lp):.6g}, {max(lp):.6g}]")
    rr = np.linspace(0, r_max, 401)
    lphi = ev.log_phi(rr)
    rep.csv("eigen.csv", {"r": rr, "phi": np.exp(lphi), "log_phi": lphi, "bound_ratio": np.exp(ev.log_bound_ratio(rr))})
    rep.csv("eigen_lp.csv", {"rho": rho, "ratio": np.array(lp)})


def _data(cfg):
    return InitialData(float(cfg["f_amp"]), float(cfg["g_amp"]), float(cfg["r0"]), Shape(cfg["shape"]))


def _simulate(cfg, params, with_tables):
    t_max, dr = float(cfg["t_max"]), float(cfg["dr"])
    data = _data(cfg)
    grid = Grid.for_run(data.r0, float(params.ell), t_max, dr)
    scfg = SolverConfig(c_cfl=float(cfg["c_cfl"]), sample_every=int(cfg["sample_every"]),
                        threshold_factor=float(cfg["threshold_factor"]),
                        snapshot_times=tuple(float(s) for s in _tuple(cfg["snapshots"])) if cfg["snapshots"] else ())
    prof = ev = None
    if with_tables:
        lam = _lam(cfg, params)
        prof = adj.build_profile(lam, params, t_max)
        ev = EigenfunctionEvaluator(params.n, lam)
    return run(params, data, grid, t_max, scfg, prof, ev)


def cmd_simulate(cfg, rep: Report):
    params = params_from(cfg)
    trace, blow = _simulate(cfg, params, bool(cfg["adjoint_tables"]))
    rep.info("status", trace.status.value)
    for k, v in blow.as_dict().items():
        rep.info(k, v)
    rep.csv("trace.csv", trace.columns())
    rep.csv("sup_u.csv", {"t": trace.times, "sup_u": trace.sup_u})
    for k, (ts, u) in enumerate(sorted(trace.snapshots.values(), key=lambda x: x[0])):
        rep.csv(f"snapshot_{k}.csv", {"r": trace.grid.r, "u": u})
        rep.info(f"snapshot_{k}.csv", f"t = {ts:.6g}")
    if trace.adjoint is None:
        return
    q = verify_Q(trace)
    rep.check("Q nondecreasing", q.monotone, "" if q.monotone else f"(first violation t={q.first_violation:.6g})")
    rep.check("Q(0)/eps matches data integral <= 1%", q.c0_rel_error <= 0.01, f"({q.c0_rel_error:.3g})")
    rep.info("Q identity drift rate", f"{q.drift_rate:.3g}")
    f = verify_F_lower(trace)
    rep.check("F lower bound", f.passed, f"(min rho {f.min_ratio:.4g})")
    hl = verify_H_lower(trace)
    rep.check("H lower bound", hl.passed, f"(t1 {hl.t1:.4g}, min ratio {hl.min_ratio:.4g})")
    rep.csv("F_ratio.csv", {"t": trace.times, "rho": f.ratio})
    rep.csv("H_ratio.csv", {"t": trace.times, "ratio": hl.ratio})


def cmd_shells(cfg, rep: Report):
    params = params_from(cfg)
    js = [int(j) for j in _tuple(cfg["shell_j"])]
    fam = ShellFamily.for_params(params)
    geo = [fam.shell(j) for j in _tuple(cfg["mj_j"])]
    for g in geo:
        rep.info(f"R_{g.j}", f"{g.R:.8g}  S=({g.S[0]:.6g}, {g.S[1]:.6g})  I=[{g.I[0]:.6g}, {g.I[1]:.6g}]  "
                             f"|I|/R={g.length_I / g.R:.6g}")
    rep.csv("shell_geometry.csv", {"j": np.array([g.j for g in geo]), "R": np.array([g.R for g in geo]),
                                   "S_lo": np.array([g.S[0] for g in geo]), "S_hi": np.array([g.S[1] for g in geo]),
                                   "I_lo": np.array([g.I[0] for g in geo]), "I_hi": np.array([g.I[1] for g in geo])})
    tab = fam.table(int(min(js)))
    rep.csv(f"eta_psi_j{min(js)}.csv", dict(zip(("t", "eta", "eta_prime", "eta_second", "psi"), tab.T)))
    if int(cfg["shell_run"]):
        _shell_run(cfg, params, js, rep)
    ms = mj_slopes(params, tuple(int(j) for j in _tuple(cfg["mj_j"])))
    detail = (f"(predicted {ms.predicted:.6g}; total {ms.slope_total:.6g}, M1 {ms.slope_1:.6g}, "
              f"M2 {ms.slope_2:.6g}; against log(1+R): {ms.slope_total_shifted:.6g})")
    ok = ms.max_rel_error() <= float(cfg["mj_tol"])
    if int(cfg["mj_mandatory"]):
        rep.check("M_j slopes within tolerance", ok, detail)
    else:
        rep.info("M_j slopes (informational)", detail)
    rep.csv("mj.csv", {"R": np.array([r.R for r in ms.rows]), "M_total": np.array([r.M_total for r in ms.rows]),
                       "M_1": np.array([r.M_1 for r in ms.rows]), "M_2": np.array([r.M_2 for r in ms.rows])})


def _shell_run(cfg, params, js, rep):
    last = shell(max(js), params.omega)
    if last.I[1] > float(cfg["t_max"]):
        raise ConfigurationError(f"I_{max(js)} ends at t = {last.I[1]:.6g} beyond t_max; "
                                 "raise t_max or choose a larger oscillation frequency")
    trace, _ = _simulate(cfg, params, False)
    checks = [shell_check(trace, j) for j in js]
    c = [s.c_fit for s in checks]
    C = [s.C_fit for s in checks]
    for s in checks:
        rep.info(f"shell {s.j}", f"L={s.L_j:.6g} c_fit={s.c_fit:.6g} C_fit={s.C_fit:.6g} partial={s.partial}")
    complete = not any(s.partial for s in checks)
    rep.check("shells complete", complete)
    rep.check("c_fit > 0, max/min <= 3", min(c) > 0 and max(c) / min(c) <= 3, f"({max(c) / min(c):.4g})")
    okC = all(math.isfinite(x) and x > 0 for x in C)
    rep.check("C_fit finite, max/min <= 3", okC and max(C) / min(C) <= 3,
              f"({max(C) / min(C):.4g})" if okC else "")
    d = test_function_identity(trace, min(js))
    rep.check(f"test-function identity j={min(js)}", d <= float(cfg["identity_tol"]), f"(defect {d:.3g})")
    rep.csv("shells.csv", {"j": np.array(js), "L": np.array([s.L_j for s in checks]),
                           "lower_expr": np.array([s.lower_expr for s in checks]),
                           "upper_expr": np.array([s.upper_expr for s in checks]),
                           "c_fit": np.array(c), "C_fit": np.array(C)})


def cmd_lifespan(cfg, rep: Report):
    params = params_from(cfg)
    eps = np.geomspace(float(cfg["eps_min"]), float(cfg["eps_max"]), int(cfg["eps_count"]))
    sig = float(sigma_alpha(params.n, params.ell, params.alpha, params.p))
    store = ResultsStore(cfg["store"]) if cfg["store"] else None
    fit = lifespan_sweep(params, eps, HorizonRule(sig, float(cfg["horizon_c"])), _data(cfg), dr=float(cfg["dr"]),
                         t_min=float(cfg["t_min"]), workers=int(cfg["workers"]), store=store)
    rep.info("predicted sigma_alpha", f"{sig:.6g}")
    rep.check("fit conclusive", not fit.inconclusive, f"({fit.used} detections with T >= {fit.t_min:g})")
    if not fit.inconclusive:
        rep.info("fitted slope", f"{fit.slope:.6g} (residual {fit.residual:.3g})")
        rep.check("slope negative", fit.slope < 0)
        rep.check(f"slope within {float(cfg['slope_tol']):.0%} of sigma_alpha", fit.rel_error <= float(cfg["slope_tol"]),
                  f"({fit.rel_error:.3g})")
        rep.check("slope shift at 10x threshold", fit.threshold_sensitivity <= float(cfg["sensitivity_tol"]),
                  f"({fit.threshold_sensitivity:.3g})")
    rep.check("T_detect nonincreasing in eps", fit.monotone)
    rep.csv("lifespan.csv", {"eps": np.array([s[0] for s in fit.samples]), "T_detect": np.array([s[1] for s in fit.samples])})


COMMANDS = {"classify": cmd_classify, "adjoint": cmd_adjoint, "eigen": cmd_eigen, "simulate": cmd_simulate,
            "shells": cmd_shells, "lifespan": cmd_lifespan}


def verify_all(args) -> int:
    base = pathlib.Path(args.out or DEFAULTS["out"])
    plan = [("classify", {}), ("adjoint", {"lam": 1, "t_max": 200.0}), ("eigen", {"lam": 1}),
            ("simulate", {"lam": 1, "dr": 1 / 256}), ("shells", SHELL_PRESET),
            ("shells_baseline", {"shell_run": 0}), ("lifespan", {"dr": 1 / 32})]
    worst = 0
    for name, preset in plan:
        code = _run_one(name.split("_")[0], args, preset, base / name, label=name)
        worst = max(worst, code)
    return worst


def _run_one(name, args, preset, out, label=None) -> int:
    try:
        cfg = load_config(args.config, args.set, base=preset)
        rep = Report(label or name, out)
        COMMANDS[name](cfg, rep)
        return rep.finish()
    except (ConfigurationError, DomainError, RegimeError) as exc:
        print(f"{name}: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"{name}: numerical failure: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tricomi-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["verify-all"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify-all":
        return verify_all(args)
    overrides = list(args.set)
    if args.out:
        overrides.append(f"out={args.out}")
    args.set = overrides
    try:
        out = load_config(args.config, args.set)["out"]
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return _run_one(args.command, args, {}, out)


if __name__ == "__main__":
    sys.exit(main())
