"""Positive decreasing solution of ``m'' = (lam^2 (1+t)^{2l} - mu^2 (1+t)^{-2}) m``.

For large t the profile is written as

    m(t) = (1+t)^{-l/2} exp(-lam A(t)) exp(-int_T^t eta),

where ``eta`` is the fixed point of

    (T eta)(t) = -int_t^inf K(t,s) (q (1+s)^{-2} + eta(s)^2) ds,
    K(t,s) = exp(-2 lam (A(s) - A(t))) ((1+t)/(1+s))^l.

The fixed point is found by Picard iteration on a grid of cells uniform in
``log(1+t)``; each cell carries Gauss-Lobatto nodes and the integral
operator is applied exactly for the cell-wise interpolant.  Because K is
multiplicative, ``K(t,s) = K(t,u) K(u,s)``, the integral over ``[t, inf)`` is
accumulated by one backward sweep over the cells.  Below the transition time
``T1`` the Riccati variable ``r = -m'/m`` is integrated backward, which is
the stable direction.  Profiles are stored as ``(log m, r)`` since
``exp(-lam A)`` underflows quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_legendre

from .errors import ConfigurationError, DomainError, NumericalError

# log of the kernel cutoff 1e-16
_LOG_KCUT = math.log(1e-16)


def default_lambda(mu2: float) -> float:
    mu = math.sqrt(float(mu2))
    return max(2 * mu, mu + 1)


def _check(lam, ell, mu2):
    if not -1 < ell < 0:
        raise DomainError(f"need -1 < ell < 0, got {ell!r}")
    if not lam > math.sqrt(mu2):
        raise DomainError(f"need lambda > |mu| = {math.sqrt(mu2):.6g}, got {lam!r}")


def q(params) -> float:
    """``q = mu^2 + l(l+2)/4``."""
    return float(params.mu2) + float(params.ell) * (float(params.ell) + 2) / 4


def b0(t, lam, ell):
    t = np.asarray(t, dtype=float)
    return lam * (1 + t) ** ell + ell / (2 * (1 + t))


def _A(t, ell):
    return np.expm1((ell + 1) * np.log1p(t)) / (ell + 1)


def _A_diff(y_from, y_to, ell):
    """``A(s) - A(t)`` with ``y = log(1+t)``, accurate for nearby arguments."""
    k = ell + 1
    return np.exp(k * y_from) * np.expm1(k * (y_to - y_from)) / k


def log_kernel(t, s, lam, ell):
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s < t):
        raise DomainError("kernel needs s >= t")
    yt, ys = np.log1p(t), np.log1p(s)
    return -2 * lam * _A_diff(yt, ys, ell) + ell * (yt - ys)


def kernel(t, s, lam, ell):
    """``K(t,s) = exp(-2 lam (A(s) - A(t))) ((1+t)/(1+s))^l`` for ``s >= t``."""
    return np.exp(log_kernel(t, s, lam, ell))


def potential(t, lam, ell, mu2):
    t = np.asarray(t, dtype=float)
    return lam**2 * (1 + t) ** (2 * ell) - mu2 / (1 + t) ** 2


def _kernel_horizon(t, lam, ell, log_cut=_LOG_KCUT):
    """Smallest s with ``log K(t, s) <= log_cut``."""
    f = lambda s: float(log_kernel(t, s, lam, ell)) - log_cut
    hi = max(2 * t + 1, 1.0)
    while f(hi) > 0:
        hi *= 2
    return optimize.brentq(f, t, hi, xtol=1e-12, rtol=1e-14)


def kernel_integral(t, lam, ell, power):
    """``int_t^inf K(t,s) (1+s)^{-power} ds`` by adaptive quadrature, truncated at K < 1e-16."""
    s_end = _kernel_horizon(t, lam, ell)
    g = lambda s: math.exp(float(log_kernel(t, s, lam, ell)) - power * math.log1p(s))
    pts = np.linspace(t, s_end, 9)
    return sum(integrate.quad(g, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
               for lo, hi in zip(pts[:-1], pts[1:]))


def kernel_bounds(t, lam, ell):
    """Closed-form bounds for the two kernel integrals with powers 2 and 2l+4."""
    return (1 + t) ** (-ell - 2) / (2 * lam), (1 + t) ** (-3 * ell - 4) / (2 * lam)


def contraction_time(lam, ell, qv) -> float:
    """``T = max(1, (2q/lam^2)^{1/(2(l+1))})``."""
    return max(1.0, (2 * qv / lam**2) ** (1 / (2 * (ell + 1))))


def _lobatto(P):
    c = np.zeros(P)
    c[-1] = 1
    inner = np.polynomial.legendre.Legendre(c).deriv().roots().real
    return np.concatenate([[-1.0], np.sort(inner), [1.0]])


def _lagrange(nodes, x):
    """Matrix ``L[k, b] = L_b(x_k)`` of the Lagrange basis on ``nodes``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = len(nodes)
    L = np.ones((x.size, P))
    for b in range(P):
        for c in range(P):
            if c != b:
                L[:, b] *= (x - nodes[c]) / (nodes[b] - nodes[c])
    return L


def _lagrange_deriv(nodes, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = len(nodes)
    D = np.zeros((x.size, P))
    for b in range(P):
        for c in range(P):
            if c == b:
                continue
            term = np.full(x.size, 1 / (nodes[b] - nodes[c]))
            for d in range(P):
                if d != b and d != c:
                    term = term * (x - nodes[d]) / (nodes[b] - nodes[d])
            D[:, b] += term
    return D


@dataclass(frozen=True)
class AdjointGrid:
    """Cells of width ``dlog`` in ``log(1+t)`` with ``order`` Lobatto nodes each.

    The cell width is further capped at ``kernel_cells`` of the kernel decay
    length ``1/(2 lam a)`` at the end of the grid.
    """

    dlog: float = 0.01
    order: int = 7
    quad_order: int = 20
    kernel_cells: float = 0.25

    def key(self) -> tuple:
        return (self.dlog, self.order, self.quad_order, self.kernel_cells)


@dataclass
class RiccatiSolution:
    lam: float
    ell: float
    mu2: float
    q: float
    T: float
    M: float
    t_max: float
    t_end: float
    y_edges: np.ndarray
    xi: np.ndarray
    eta_nodes: np.ndarray  # shape (cells, order)
    update_norms: list
    ball_ok: bool
    first_iterate_norm: float
    tail_bound: float
    _gl: tuple = field(repr=False, default=None)
    _cum: np.ndarray = field(repr=False, default=None)

    @property
    def cells(self) -> int:
        return len(self.y_edges) - 1

    @property
    def t_nodes(self) -> np.ndarray:
        return np.expm1(self._y_nodes())

    def _y_nodes(self):
        d = np.diff(self.y_edges)[:, None]
        return self.y_edges[:-1, None] + 0.5 * d * (self.xi[None, :] + 1)

    @property
    def eta_grid(self) -> tuple:
        """``(t, eta)`` at the distinct nodes on ``[T, t_max]``."""
        t = np.concatenate([self.t_nodes[:, :-1].ravel(), [self.t_nodes[-1, -1]]])
        e = np.concatenate([self.eta_nodes[:, :-1].ravel(), [self.eta_nodes[-1, -1]]])
        keep = t <= self.t_max * (1 + 1e-12)
        return t[keep], e[keep]

    @property
    def contraction_ratios(self) -> np.ndarray:
        u = np.asarray(self.update_norms)
        with np.errstate(divide="ignore", invalid="ignore"):
            return u[1:] / u[:-1]

    def weighted_norm(self) -> float:
        return float(np.max((1 + self.t_nodes) ** (self.ell + 2) * np.abs(self.eta_nodes)))

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < self.T * (1 - 1e-14)) or np.any(t > self.t_end):
            raise DomainError("t outside the Riccati grid")
        y = np.log1p(t)
        i = np.clip(np.searchsorted(self.y_edges, y, side="right") - 1, 0, self.cells - 1)
        lo, hi = self.y_edges[i], self.y_edges[i + 1]
        return i, y, lo, hi

    def eta(self, t):
        i, y, lo, hi = self._locate(t)
        xi = 2 * (y - lo) / (hi - lo) - 1
        return np.sum(_lagrange(self.xi, xi) * self.eta_nodes[i], axis=1)

    def eta_prime(self, t):
        i, y, lo, hi = self._locate(t)
        xi = 2 * (y - lo) / (hi - lo) - 1
        D = _lagrange_deriv(self.xi, xi)
        deta_dy = np.sum(D * self.eta_nodes[i], axis=1) * 2 / (hi - lo)
        return deta_dy / (1 + np.asarray(t, dtype=float).ravel())

    def integral(self, t):
        """``int_T^t eta(s) ds``."""
        i, y, lo, hi = self._locate(t)
        g, w = self._gl
        z = lo[:, None] + 0.5 * (y - lo)[:, None] * (g[None, :] + 1)
        xi = 2 * (z - lo[:, None]) / (hi - lo)[:, None] - 1
        L = _lagrange(self.xi, xi.ravel()).reshape(z.shape + (len(self.xi),))
        vals = np.einsum("kgb,kb->kg", L, self.eta_nodes[i])
        part = 0.5 * (y - lo) * np.sum(w[None, :] * vals * np.exp(z), axis=1)
        return self._cum[i] + part

    def riccati_residual(self, t) -> np.ndarray:
        """``eta' - 2 b0 eta - eta^2 - q (1+t)^{-2}``."""
        t = np.asarray(t, dtype=float)
        e = self.eta(t)
        return self.eta_prime(t) - 2 * b0(t, self.lam, self.ell) * e - e**2 - self.q / (1 + t) ** 2


def solve_riccati(lam, params, t_max, tol=1e-14, grid: Optional[AdjointGrid] = None,
                  max_iter=200) -> RiccatiSolution:
    """Picard iteration for ``eta`` on ``[T, t_end]`` starting from ``eta = 0``."""
    grid = grid or AdjointGrid()
    ell, mu2 = float(params.ell), float(params.mu2)
    lam = float(lam)
    _check(lam, ell, mu2)
    qv = q(params)
    T = contraction_time(lam, ell, qv)
    M = qv / lam
    if T > t_max:
        raise ConfigurationError(f"contraction threshold T = {T:.6g} exceeds t_max = {t_max:.6g}")
    t_end = _kernel_horizon(t_max, lam, ell)

    y0, y1 = math.log1p(T), math.log1p(t_end)
    decay = 1 / (2 * lam * (1 + t_end) ** (ell + 1))
    dlog = min(grid.dlog, grid.kernel_cells * decay)
    N = max(1, int(math.ceil((y1 - y0) / dlog)))
    y_edges = y0 + (y1 - y0) * np.arange(N + 1) / N
    t_end = math.expm1(y_edges[-1])
    xi = _lobatto(grid.order)
    P = len(xi)
    g, w = roots_legendre(grid.quad_order)

    d = np.diff(y_edges)
    ya = y_edges[:-1, None] + 0.5 * d[:, None] * (xi[None, :] + 1)  # (N, P)
    yr = y_edges[1:]
    # W[i, a, b] = int_{ya}^{y_{i+1}} K(t(ya), t(y)) L_b(y) e^y dy
    span = (yr[:, None] - ya)  # (N, P)
    z = ya[:, :, None] + 0.5 * span[:, :, None] * (g[None, None, :] + 1)  # (N, P, G)
    logK = -2 * lam * _A_diff(ya[:, :, None], z, ell) + ell * (ya[:, :, None] - z)
    xz = 2 * (z - y_edges[:-1, None, None]) / d[:, None, None] - 1
    L = _lagrange(xi, xz.ravel()).reshape(z.shape + (P,))
    W = np.einsum("iag,iagb->iab", (0.5 * span[:, :, None] * w) * np.exp(logK + z), L)
    # propagation from each node to the right edge of its cell
    K_right = np.exp(-2 * lam * _A_diff(ya, yr[:, None], ell) + ell * (ya - yr[:, None]))

    t_nodes = np.expm1(ya)
    weight = (1 + t_nodes) ** (ell + 2)
    q_term = qv / (1 + t_nodes) ** 2

    def apply(eta):
        f = q_term + eta**2
        local = np.einsum("iab,ib->ia", W, f)
        out = np.empty_like(eta)
        carry = 0.0
        for i in range(N - 1, -1, -1):
            out[i] = -(local[i] + K_right[i] * carry)
            carry = -out[i, 0]
        return out

    eta = np.zeros((N, P))
    norms = []
    ball_ok = True
    first_norm = None
    for it in range(max_iter):
        new = apply(eta)
        if np.any(new > 0) or np.max(weight * np.abs(new)) > M * (1 + 1e-9):
            ball_ok = False
        if first_norm is None:
            first_norm = float(np.max(weight * np.abs(new)))
        u = float(np.max(weight * np.abs(new - eta)))
        norms.append(u)
        eta = new
        if u <= tol * max(1.0, first_norm):
            break
        if len(norms) >= 4 and norms[-1] > norms[-2] > norms[-3]:
            raise NumericalError("Picard iteration is not contracting",
                                 {"update_norms": norms, "T": T, "M": M})
    else:
        raise NumericalError("Picard iteration did not reach tolerance",
                             {"update_norms": norms, "tol": tol})

    # tail dropped beyond t_end, measured in the weighted norm on [T, t_max]
    tail = (qv + M**2) * kernel(t_max, t_end, lam, ell) * (1 + t_end) ** (-ell - 2) / (2 * lam)
    tail_bound = float(tail * (1 + t_max) ** (ell + 2))

    sol = RiccatiSolution(lam, ell, mu2, qv, T, M, float(t_max), t_end, y_edges, xi, eta,
                          norms, ball_ok, first_norm, tail_bound, _gl=(g, w))
    # cumulative integral of eta at cell starts
    full = np.zeros(N + 1)
    zc = y_edges[:-1, None] + 0.5 * d[:, None] * (g[None, :] + 1)
    Lc = _lagrange(xi, g)
    vals = eta @ Lc.T
    full[1:] = np.cumsum(0.5 * d * np.sum(w[None, :] * vals * np.exp(zc), axis=1))
    sol._cum = full[:-1]
    return sol


@dataclass
class AdjointProfile:
    """Sampled ``m``; ``log_m`` and ``ratio = -m'/m`` are the stored quantities."""

    lam: float
    ell: float
    mu2: float
    t_grid: np.ndarray
    log_m: np.ndarray
    ratio: np.ndarray
    T: float = math.nan
    T1: float = math.nan
    source: str = "riccati"
    fitted: dict = field(default_factory=dict)
    _eval: Optional[Callable] = field(default=None, repr=False)
    _pchip: Optional[tuple] = field(default=None, repr=False)

    @property
    def t_max(self) -> float:
        return float(self.t_grid[-1])

    @property
    def m(self) -> np.ndarray:
        return np.exp(self.log_m)

    @property
    def m_prime(self) -> np.ndarray:
        return -self.ratio * np.exp(self.log_m)

    @property
    def fitted_c(self) -> float:
        return self.fitted.get("c", math.nan)

    @property
    def fitted_C(self) -> float:
        return self.fitted.get("C", math.nan)

    def evaluate(self, t):
        """``(log m, -m'/m)`` at arbitrary ``t`` in ``[0, t_max]``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_max * (1 + 1e-12)):
            raise DomainError("t outside the profile range")
        if self._eval is not None:
            return self._eval(t)
        return self.interpolate(t)

    def interpolate(self, t):
        """Monotone cubic interpolation of ``(log m, r)`` in ``log(1+t)``."""
        if self._pchip is None:
            x = np.log1p(self.t_grid)
            self._pchip = (PchipInterpolator(x, self.log_m), PchipInterpolator(x, self.ratio))
        x = np.log1p(np.asarray(t, dtype=float))
        return self._pchip[0](x), self._pchip[1](x)

    def shifted(self, log_scale: float) -> "AdjointProfile":
        """Same profile multiplied by ``exp(log_scale)``."""
        base = self._eval
        ev = None if base is None else (lambda t: (base(t)[0] + log_scale, base(t)[1]))
        return AdjointProfile(self.lam, self.ell, self.mu2, self.t_grid, self.log_m + log_scale,
                              self.ratio, self.T, self.T1, self.source, dict(self.fitted), ev)

    def ode_residual(self, t, h_rel=2e-3):
        """``|m'' - V m| / max(|m|, |V m|)`` with a centered second difference of step ``h_rel (1+t)``."""
        t = np.asarray(t, dtype=float)
        h = h_rel * (1 + t)
        if np.any(t - h < 0) or np.any(t + h > self.t_max):
            raise DomainError("stencil leaves the profile range")
        lm, _ = self.evaluate(t)
        lp, _ = self.evaluate(t + h)
        ln, _ = self.evaluate(t - h)
        d2 = (np.expm1(lp - lm) + np.expm1(ln - lm)) / h**2
        V = potential(t, self.lam, self.ell, self.mu2)
        return np.abs(d2 - V) / np.maximum(1.0, np.abs(V))

    def P(self) -> np.ndarray:
        """``m m'`` in signed log form: returns ``log|P|`` (P itself is negative)."""
        return 2 * self.log_m + np.log(self.ratio)

    def save(self, path):
        np.savez(path, lam=self.lam, ell=self.ell, mu2=self.mu2, t_grid=self.t_grid,
                 log_m=self.log_m, ratio=self.ratio, T=self.T, T1=self.T1,
                 source=self.source, fitted_keys=list(self.fitted), fitted_vals=list(self.fitted.values()))

    @classmethod
    def load(cls, path) -> "AdjointProfile":
        d = np.load(path, allow_pickle=False)
        fitted = dict(zip(d["fitted_keys"].tolist(), d["fitted_vals"].tolist()))
        return cls(float(d["lam"]), float(d["ell"]), float(d["mu2"]), d["t_grid"], d["log_m"],
                   d["ratio"], float(d["T"]), float(d["T1"]), str(d["source"]), fitted)


def _log_wkb(t, lam, ell):
    return -0.5 * ell * np.log1p(t) - lam * _A(t, ell)


def _backward(lam, ell, mu2, t_start, log_m0, r0, t_stop, rtol=1e-13):
    def rhs(t, z):
        return [-z[1], z[1] ** 2 - float(potential(t, lam, ell, mu2))]

    sol = integrate.solve_ivp(rhs, (t_start, t_stop), [log_m0, r0], method="DOP853",
                              rtol=rtol, atol=1e-14, dense_output=True)
    if not sol.success:
        raise NumericalError(f"backward integration failed: {sol.message}")
    return sol.sol


def _log_grid(t_lo, t_hi, dlog, include_hi=True):
    y0, y1 = math.log1p(t_lo), math.log1p(t_hi)
    n = max(1, int(math.ceil((y1 - y0) / dlog)))
    y = y0 + (y1 - y0) * np.arange(n + 1) / n
    t = np.expm1(y)
    t[0] = t_lo
    t[-1] = t_hi
    return t if include_hi else t[:-1]


def _fit_bounds(profile, t_from):
    t = profile.t_grid
    sel = t >= t_from
    a = (1 + t[sel]) ** profile.ell
    lw = _log_wkb(t[sel], profile.lam, profile.ell)
    rm = np.exp(profile.log_m[sel] - lw)
    rp = profile.ratio[sel] / a * rm
    return {"c": float(rm.min()), "C": float(rm.max()),
            "c_prime": float(rp.min()), "C_prime": float(rp.max())}


def build_profile(lam, params, t_max, grid_spec: Optional[AdjointGrid] = None,
                  tol=1e-14, riccati: Optional[RiccatiSolution] = None) -> AdjointProfile:
    """Fixed-point formula on ``[T1, t_max]`` and backward Riccati integration on ``[0, T1]``."""
    grid = grid_spec or AdjointGrid()
    sol = riccati or solve_riccati(lam, params, t_max, tol=tol, grid=grid)
    lam, ell, mu2 = sol.lam, sol.ell, sol.mu2

    def formula(t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        lm = _log_wkb(flat, lam, ell) - sol.integral(flat)
        r = b0(flat, lam, ell) + sol.eta(flat)
        return lm.reshape(t.shape), r.reshape(t.shape)

    t_hi = _log_grid(sol.T, t_max, grid.dlog)
    _, r_hi = formula(t_hi)
    a_hi = (1 + t_hi) ** ell
    ok = (0.5 * lam * a_hi <= r_hi) & (r_hi <= 1.5 * lam * a_hi)
    if not ok[-1]:
        raise ConfigurationError(f"ratio bracket not yet reached at t_max = {t_max:.6g}; raise t_max")
    bad = np.nonzero(~ok)[0]
    k1 = 0 if bad.size == 0 else bad[-1] + 1
    T1 = float(t_hi[k1])
    lm1, r1 = formula(np.array(T1))
    back = _backward(lam, ell, mu2, T1, float(lm1), float(r1), 0.0)

    def evaluate(t):
        t = np.asarray(t, dtype=float)
        lm = np.empty(t.shape)
        r = np.empty(t.shape)
        lo = t < T1
        if np.any(lo):
            z = back(t[lo])
            lm[lo], r[lo] = z[0], z[1]
        if np.any(~lo):
            lm[~lo], r[~lo] = formula(t[~lo])
        return lm, r

    t_grid = np.concatenate([_log_grid(0.0, T1, grid.dlog, include_hi=False), t_hi[k1:]])
    log_m, ratio = evaluate(t_grid)
    if np.any(ratio <= 0) or np.any(~np.isfinite(log_m)):
        raise NumericalError("m' >= 0 or nonfinite m on the grid; tighten the integrator")
    prof = AdjointProfile(lam, ell, mu2, t_grid, log_m, ratio, sol.T, T1, "riccati", {}, evaluate)
    prof.fitted = _fit_bounds(prof, T1)
    return prof


def oracle_direct(lam, params, t_max, dlog=0.01, far_factor=4.0) -> AdjointProfile:
    """Backward integration from ``far_factor * t_max`` with the WKB seed.

    Normalized so that ``m = a^{-1/2} e^{-lam A}`` at ``t_max / 2``.
    """
    ell, mu2, lam = float(params.ell), float(params.mu2), float(lam)
    _check(lam, ell, mu2)
    t_far = far_factor * t_max
    back = _backward(lam, ell, mu2, t_far, float(_log_wkb(t_far, lam, ell)),
                     float(b0(t_far, lam, ell)), 0.0)
    anchor = 0.5 * t_max
    shift = float(_log_wkb(anchor, lam, ell)) - float(back(anchor)[0])

    def evaluate(t):
        z = back(np.asarray(t, dtype=float))
        return z[0] + shift, z[1]

    t_grid = _log_grid(0.0, t_max, dlog)
    log_m, ratio = evaluate(t_grid)
    prof = AdjointProfile(lam, ell, mu2, t_grid, log_m, ratio, math.nan, math.nan, "oracle", {}, evaluate)
    prof.fitted = _fit_bounds(prof, 0.0)
    return prof


def compare_profiles(p1: AdjointProfile, p2: AdjointProfile, anchor=None, t=None) -> float:
    """Max relative difference of ``m`` after matching both at ``anchor`` (default t_max/2)."""
    t_max = min(p1.t_max, p2.t_max)
    anchor = 0.5 * t_max if anchor is None else anchor
    t = p1.t_grid[p1.t_grid <= t_max] if t is None else np.asarray(t, dtype=float)
    l1, _ = p1.evaluate(t)
    l2, _ = p2.evaluate(t)
    a1, _ = p1.evaluate(np.array(anchor))
    a2, _ = p2.evaluate(np.array(anchor))
    return float(np.max(np.abs(np.expm1((l2 - a2) - (l1 - a1)))))


@dataclass
class BoundsReport:
    windows: list  # (t0, m_ratio_min, m_ratio_max, mp_ratio_min, mp_ratio_max)
    t0: float
    positive: bool
    last_decade_drift: float
    stable: bool
    formula_bracket: tuple
    formula_range: tuple
    formula_ok: bool

    def summary(self) -> dict:
        return {"t0": self.t0, "positive": self.positive, "last_decade_drift": self.last_decade_drift,
                "stable": self.stable, "formula_bracket_lo": self.formula_bracket[0],
                "formula_bracket_hi": self.formula_bracket[1], "formula_min": self.formula_range[0],
                "formula_max": self.formula_range[1], "formula_ok": self.formula_ok}


def bound_ratios(profile: AdjointProfile, t=None):
    """``m / (a^{-1/2} e^{-lam A})`` and ``-m' / (a^{1/2} e^{-lam A})``."""
    t = profile.t_grid if t is None else np.asarray(t, dtype=float)
    lm, r = profile.evaluate(t)
    rm = np.exp(lm - _log_wkb(t, profile.lam, profile.ell))
    return rm, r / (1 + t) ** profile.ell * rm


def verify_bounds(profile: AdjointProfile, n_windows=12) -> BoundsReport:
    t = profile.t_grid
    rm, rp = bound_ratios(profile)
    positive = bool(np.all(rm > 0) and np.all(rp > 0))
    t_max = profile.t_max
    cands = np.unique(np.concatenate([[0.0], np.geomspace(1.0, t_max / 10, n_windows)]))
    windows = []
    t0 = math.nan
    for c in cands:
        s = t >= c
        row = (float(c), float(rm[s].min()), float(rm[s].max()), float(rp[s].min()), float(rp[s].max()))
        windows.append(row)
        if math.isnan(t0) and row[2] / row[1] <= 2 and row[4] / row[3] <= 2:
            t0 = float(c)
    last = t >= t_max / 10
    drift = float(max(rm[last].max() / rm[last].min(), rp[last].max() / rp[last].min()))
    qv = profile.mu2 + profile.ell * (profile.ell + 2) / 4
    bracket = (1.0, math.exp(math.sqrt(qv) / (math.sqrt(2) * (profile.ell + 1))))
    if math.isnan(profile.T1):
        frange = (math.nan, math.nan)
        fok = False
    else:
        # the formula region is normalized so the ratio is 1 at T
        f = t >= profile.T1
        lT, _ = profile.evaluate(np.array(profile.T))
        base = float(np.exp(lT - _log_wkb(profile.T, profile.lam, profile.ell)))
        fr = rm[f] / base
        frange = (float(fr.min()), float(fr.max()))
        fok = frange[0] >= bracket[0] * (1 - 1e-12) and frange[1] <= bracket[1]
    return BoundsReport(windows, t0, positive, drift, drift <= 2, bracket, frange, bool(fok))


def profile_cache_key(lam, params, t_max, grid: AdjointGrid) -> str:
    import hashlib
    raw = repr((round(float(lam), 15), float(params.ell), float(params.mu2), float(t_max), grid.key()))
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def cached_profile(lam, params, t_max, grid: Optional[AdjointGrid] = None, cache_dir=None) -> AdjointProfile:
    """``build_profile`` with an on-disk ``.npz`` cache.

    Profiles read back from the cache evaluate by monotone cubic
    interpolation of the stored grid.
    """
    import pathlib

    grid = grid or AdjointGrid()
    if cache_dir is None:
        return build_profile(lam, params, t_max, grid)
    path = pathlib.Path(cache_dir) / f"adjoint_{profile_cache_key(lam, params, t_max, grid)}.npz"
    if path.exists():
        return AdjointProfile.load(path)
    prof = build_profile(lam, params, t_max, grid)
    path.parent.mkdir(parents=True, exist_ok=True)
    prof.save(path)
    return prof
