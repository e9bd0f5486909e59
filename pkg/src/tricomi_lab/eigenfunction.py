"""The radial eigenfunction ``phi_lambda(x) = int_{S^{n-1}} exp(lambda x.w) dS(w)``.

It solves ``Delta phi = lambda^2 phi``, is positive and grows like
``r^{-(n-1)/2} e^{lambda r}``.  Values are produced in log form
``log phi(r) = log|S^{n-2}| + lambda r + log int_0^pi e^{lambda r (cos th - 1)} sin^{n-2} th dth``
so nothing overflows; closed forms are used for n = 1 and n = 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln, roots_legendre

from .errors import DomainError

# Beyond this many Gaussian widths the integrand is below exp(-c^2/2) = e^-72.
_WIDTHS = 12.0


def sphere_area(n: int) -> float:
    """``|S^{n-1}|`` for the unit sphere in R^n; ``|S^0| = 2``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return float(np.exp(math.log(2) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n)))


def _log_sinhc(x):
    """``log(sinh(x)/x)`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-3
    xs = x[small] ** 2
    out[small] = xs / 6 - xs**2 / 180
    xl = x[~small]
    out[~small] = xl + np.log(-np.expm1(-2 * xl)) - np.log(2 * xl)
    return out


class EigenfunctionEvaluator:
    """Evaluate ``phi_lambda`` and its first two radial derivatives."""

    def __init__(self, n: int, lam: float, order: int = 64):
        if int(n) != n or n < 1:
            raise DomainError("n must be a positive integer")
        if not lam > 0:
            raise DomainError("lambda must be positive")
        self.n = int(n)
        self.lam = float(lam)
        self.order = int(order)
        self._x, self._w = roots_legendre(self.order)
        if self.n >= 2:
            self._log_surface = math.log(sphere_area(self.n - 1))

    @property
    def phi0(self) -> float:
        return sphere_area(self.n)

    def _theta_moments(self, r, powers):
        """``int_0^pi e^{x(cos th - 1)} sin^{n-2}th cos^k th dth`` for k in powers, x = lam r."""
        x = self.lam * np.atleast_1d(np.asarray(r, dtype=float))
        # the mass sits in theta <~ 1/sqrt(x); shrink the interval accordingly
        top = np.minimum(math.pi, _WIDTHS / np.sqrt(np.maximum(x, 1e-300)))
        th = 0.5 * top[:, None] * (self._x[None, :] + 1)
        w = 0.5 * top[:, None] * self._w[None, :]
        base = np.exp(-x[:, None] * (1 - np.cos(th)))
        if self.n > 2:
            base = base * np.sin(th) ** (self.n - 2)
        c = np.cos(th)
        return [np.sum(w * base * c**k, axis=1) for k in powers]

    def log_phi(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("r must be nonnegative")
        x = self.lam * r
        if self.n == 1:
            # 2 cosh(x) = e^x (1 + e^{-2x})
            return x + np.log1p(np.exp(-2 * x))
        if self.n == 3:
            return math.log(4 * math.pi) + _log_sinhc(x)
        (m0,) = self._theta_moments(r.ravel(), [0])
        return (self._log_surface + x.ravel() + np.log(m0)).reshape(r.shape)

    def phi(self, r):
        return np.exp(self.log_phi(r))

    def phi_quadrature(self, r):
        """Generic theta-quadrature path, usable for every n (the n = 1 case is a two-point sum)."""
        r = np.asarray(r, dtype=float)
        if self.n == 1:
            return 2 * np.cosh(self.lam * r)
        (m0,) = self._theta_moments(r.ravel(), [0])
        return (np.exp(self._log_surface + self.lam * r.ravel()) * m0).reshape(r.shape)

    def derivatives(self, r):
        """``(phi, phi', phi'')`` from differentiating under the integral sign."""
        r = np.asarray(r, dtype=float)
        lam = self.lam
        if self.n == 1:
            x = lam * r
            return 2 * np.cosh(x), 2 * lam * np.sinh(x), 2 * lam**2 * np.cosh(x)
        m0, m1, m2 = self._theta_moments(r.ravel(), [0, 1, 2])
        scale = np.exp(self._log_surface + lam * r.ravel())
        out = (scale * m0, lam * scale * m1, lam**2 * scale * m2)
        return tuple(v.reshape(r.shape) for v in out)

    def table(self, r):
        """Pre-tabulated values on a radial grid."""
        return self.phi(np.asarray(r, dtype=float))

    def eigen_residual(self, r_grid, h=None, method="stencil"):
        """``max |phi'' + (n-1)/r phi' - lam^2 phi| / phi`` over ``r_grid``.

        ``method="stencil"`` uses centered differences with step ``h``
        (default: the grid spacing) and the origin limit ``Delta phi(0) = n phi''(0)``;
        ``method="analytic"`` uses the differentiated integrals.
        """
        r = np.asarray(r_grid, dtype=float)
        if np.any(r < 0):
            raise DomainError("r must be nonnegative")
        lam2 = self.lam**2
        n = self.n
        if method == "analytic":
            f, f1, f2 = self.derivatives(r)
            with np.errstate(divide="ignore", invalid="ignore"):
                lap = np.where(r > 0, f2 + (n - 1) * f1 / np.where(r > 0, r, 1), n * f2)
            return float(np.max(np.abs(lap - lam2 * f) / f))
        if h is None:
            if r.size < 2:
                raise DomainError("need at least two grid points or an explicit h")
            h = float(np.min(np.diff(np.sort(r))))
        f0 = self.phi(r)
        fp = self.phi(r + h)
        fm = self.phi(np.abs(r - h))
        d2 = (fp - 2 * f0 + fm) / h**2
        d1 = (fp - fm) / (2 * h)
        rr = np.where(r > 0, r, 1.0)
        lap = np.where(r > 0, d2 + (n - 1) * d1 / rr, n * d2)
        return float(np.max(np.abs(lap - lam2 * f0) / f0))

    def log_bound_ratio(self, r):
        """``log(phi(r) (1+r)^{(n-1)/2} e^{-lam r})``."""
        r = np.asarray(r, dtype=float)
        return self.log_phi(r) - self.lam * r + 0.5 * (self.n - 1) * np.log1p(r)

    def pointwise_bound_ratio(self, r_max, num=4001):
        """Sup over [0, r_max] of ``phi (1+r)^{(n-1)/2} e^{-lam r}``."""
        if r_max <= 0:
            raise DomainError("r_max must be positive")
        r = np.unique(np.concatenate([np.linspace(0, r_max, num),
                                      np.geomspace(1e-6, r_max, num)]))
        return float(np.exp(np.max(self.log_bound_ratio(r))))

    def lp_ball_norm(self, rho, p):
        """``||phi||_{L^{p'}(B_rho)}^{p'}`` and its ratio to ``rho^{n-1-(n-1)p'/2} e^{p' lam rho}``."""
        if rho < 1:
            raise DomainError("rho must be >= 1")
        if not p > 1:
            raise DomainError("p must exceed 1")
        n, lam = self.n, self.lam
        pc = p / (p - 1)
        shift = pc * lam * rho

        def integrand(r):
            lr = (n - 1) * math.log(r) if r > 0 else (0.0 if n == 1 else -np.inf)
            return math.exp(lr + pc * float(self.log_phi(np.array(r))) - shift)

        # split so each piece sees at most a few e-folds
        pts = np.unique(np.concatenate([[0.0], np.maximum(rho - np.arange(0, 60) / (pc * lam), 0)]))
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += integrate.quad(integrand, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
        log_val = math.log(sphere_area(n) * total) + shift
        log_ref = (n - 1 - (n - 1) * pc / 2) * math.log(rho) + shift
        return LpBallNorm(rho=float(rho), p=float(p), log_value=log_val, ratio=math.exp(log_val - log_ref))


@dataclass(frozen=True)
class LpBallNorm:
    rho: float
    p: float
    log_value: float
    ratio: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def laplace_elementary_ratio(a: float, b: float, rho: float) -> float:
    """``int_1^rho r^a e^{b r} dr / (rho^a e^{b rho})`` by quadrature; bounded in rho for b > 0."""
    if rho < 1 or b <= 0:
        raise DomainError("need rho >= 1 and b > 0")
    val = integrate.quad(lambda r: math.exp(a * math.log(r / rho) + b * (r - rho)), 1, rho,
                         epsabs=0, epsrel=1e-12, limit=200)[0]
    return val
