"""Velocity, phase geometry and logarithmic shells.

Everything here is closed form: the speed ``a(t) = (1+t)^l`` and its
primitive ``A``, the oscillating Cauchy-Euler solution
``h(t) = (1+t)^{1/2} cos(omega log(1+t))``, the shells ``S_j``/``I_j`` around
``R_j = exp(2 pi j / omega) - 1`` and the cutoffs ``eta_j = chi(sigma_j)^k``
with analytic first and second derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError

PI_8 = math.pi / 8
PI_4 = math.pi / 4
_R_MAX = 1e300


def _nonneg(t, name="t"):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError(f"{name} must be nonnegative")
    return t


class VelocityModel:
    """Speed ``a(t) = (1+t)^l`` and travelled distance ``A(t) = int_0^t a``."""

    def __init__(self, ell: float):
        if not -1 < ell < 0:
            raise DomainError(f"need -1 < ell < 0, got {ell!r}")
        self.ell = float(ell)

    def a(self, t):
        t = _nonneg(t)
        return np.exp(self.ell * np.log1p(t))

    def a_prime(self, t):
        t = _nonneg(t)
        return self.ell * np.exp((self.ell - 1) * np.log1p(t))

    def A(self, t):
        t = _nonneg(t)
        k = self.ell + 1
        return np.expm1(k * np.log1p(t)) / k

    def A_inv(self, y):
        y = _nonneg(y, "y")
        k = self.ell + 1
        return np.expm1(np.log1p(k * y) / k)


def omega_from_mu2(mu2: float) -> float:
    if mu2 <= 0.25:
        raise DomainError("mu^2 must exceed 1/4")
    return math.sqrt(mu2 - 0.25)


def h(t, omega):
    """Oscillatory solution of ``h'' + mu^2 (1+t)^{-2} h = 0`` with h(0) = 1."""
    t = _nonneg(t)
    x = np.log1p(t)
    return np.exp(0.5 * x) * np.cos(omega * x)


def h_prime(t, omega):
    t = _nonneg(t)
    x = np.log1p(t)
    return np.exp(-0.5 * x) * (0.5 * np.cos(omega * x) - omega * np.sin(omega * x))


def h_second(t, omega):
    t = _nonneg(t)
    mu2 = omega * omega + 0.25
    return -mu2 * h(t, omega) / (1 + t) ** 2


@dataclass(frozen=True)
class ShellGeometry:
    """Shell ``S_j = {|sigma_j| < pi/4}`` and its core ``I_j = {|sigma_j| <= pi/8}``."""

    omega: float
    j: int
    R: float
    S: tuple
    I: tuple

    @property
    def length_S(self) -> float:
        return self.S[1] - self.S[0]

    @property
    def length_I(self) -> float:
        return self.I[1] - self.I[0]

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        return self.omega * (np.log1p(t) - math.log1p(self.R))

    def sigma_prime(self, t):
        return self.omega / (1 + np.asarray(t, dtype=float))

    def sigma_second(self, t):
        return -self.omega / (1 + np.asarray(t, dtype=float)) ** 2

    def in_S(self, t):
        t = np.asarray(t, dtype=float)
        return (t > self.S[0]) & (t < self.S[1])

    def in_I(self, t):
        t = np.asarray(t, dtype=float)
        return (t >= self.I[0]) & (t <= self.I[1])

    def t_of_sigma(self, s):
        """Inverse of ``sigma_j``."""
        return (1 + self.R) * np.exp(np.asarray(s, dtype=float) / self.omega) - 1


def shell(j: int, omega: float) -> ShellGeometry:
    if int(j) != j or j < 1:
        raise DomainError(f"shell index must be a positive integer, got {j!r}")
    if omega <= 0:
        raise DomainError("omega must be positive")
    x = 2 * math.pi * j / omega
    if x >= math.log(_R_MAX):
        raise DomainError(f"R_{j} exceeds floating range")
    R = math.expm1(x)
    one_R = 1 + R

    def interval(half_width):
        c = half_width / omega
        return (math.exp(-c) * one_R - 1, math.exp(c) * one_R - 1)

    return ShellGeometry(float(omega), int(j), R, interval(PI_4), interval(PI_8))


def placement_constants(omega: float) -> dict:
    """Constants with ``I_j in [c_I R_j, C_I R_j]`` and ``S_j in [c_S R_j, C_S R_j]`` for all j."""
    R1 = math.expm1(2 * math.pi / omega)
    out = {}
    for name, width in (("I", PI_8), ("S", PI_4)):
        c = width / omega
        out["c_" + name] = (math.exp(-c) * (1 + R1) - 1) / R1
        out["C_" + name] = math.exp(c) * (1 + 1 / R1)
    return out


def _smooth_step(x):
    """``S(x) = psi(x) / (psi(x) + psi(1-x))`` with ``psi(x) = exp(-1/x)``, and S', S''."""
    x = np.asarray(x, dtype=float)
    S = np.where(x >= 0.5, 1.0, 0.0)
    dS = np.zeros_like(x)
    d2S = np.zeros_like(x)
    # outside this window every term is below exp(-1000)
    live = (x > 1e-3) & (x < 1 - 1e-3)
    if np.any(live):
        y = x[live]
        z = 1 / y - 1 / (1 - y)
        dz = -1 / y**2 - 1 / (1 - y) ** 2
        d2z = 2 / y**3 - 2 / (1 - y) ** 3
        s = expit(-z)
        w = expit(z) * s
        ds = -w * dz
        S[live] = s
        dS[live] = ds
        d2S[live] = -ds * (1 - 2 * s) * dz - w * d2z
    return S, dS, d2S


@dataclass(frozen=True)
class CutoffSpec:
    """Bump ``chi`` equal to 1 on ``|s| <= inner``, 0 on ``|s| >= outer``; power ``k``."""

    k: int
    inner: float = PI_8
    outer: float = PI_4

    @classmethod
    def for_power(cls, p: float) -> "CutoffSpec":
        """Smallest admissible integer power ``k >= 2 p'``."""
        pc = p / (p - 1)
        return cls(k=int(math.ceil(2 * pc - 1e-12)))

    def chi(self, s):
        return self.chi_derivatives(s)[0]

    def chi_derivatives(self, s):
        s = np.asarray(s, dtype=float)
        width = self.outer - self.inner
        S, dS, d2S = _smooth_step((self.outer - np.abs(s)) / width)
        return S, -np.sign(s) * dS / width, d2S / width**2


def eta_derivatives(geom: ShellGeometry, cutoff: CutoffSpec, t):
    """``(eta_j, eta_j', eta_j'')`` by the chain rule; zero outside ``S_j``."""
    t = _nonneg(t)
    k = cutoff.k
    c, dc, d2c = cutoff.chi_derivatives(geom.sigma(t))
    s1, s2 = geom.sigma_prime(t), geom.sigma_second(t)
    e = c**k
    e1 = k * c ** (k - 1) * dc * s1
    e2 = k * (k - 1) * c ** (k - 2) * dc**2 * s1**2 + k * c ** (k - 1) * (d2c * s1**2 + dc * s2)
    return e, e1, e2


def eta(geom, cutoff, t):
    return eta_derivatives(geom, cutoff, t)[0]


def eta_prime(geom, cutoff, t):
    return eta_derivatives(geom, cutoff, t)[1]


def eta_second(geom, cutoff, t):
    return eta_derivatives(geom, cutoff, t)[2]


def eta_weighted(geom: ShellGeometry, cutoff: CutoffSpec, p: float, t):
    """``|eta'|^{p'} eta^{-1/(p-1)}`` and ``|eta''|^{p'} eta^{-1/(p-1)}``, extended by zero.

    The negative power of eta is absorbed into ``chi^{k - p'}`` and
    ``chi^{k - 2p'}`` so the edge of the shell never produces ``0 * inf``.
    """
    t = _nonneg(t)
    k = cutoff.k
    pc = p / (p - 1)
    if k < 2 * pc - 1e-12:
        raise DomainError(f"cutoff power k={k} below 2p' = {2 * pc:.6g}")
    c, dc, d2c = cutoff.chi_derivatives(geom.sigma(t))
    s1, s2 = geom.sigma_prime(t), geom.sigma_second(t)
    first = k**pc * np.abs(dc * s1) ** pc * c ** (k - pc)
    inner = (k - 1) * dc**2 * s1**2 + c * (d2c * s1**2 + dc * s2)
    second = k**pc * np.abs(inner) ** pc * c ** (k - 2 * pc)
    return first, second


def psi(geom, cutoff, t):
    """Phase-localized test profile ``Psi_j = h eta_j``."""
    return h(t, geom.omega) * eta(geom, cutoff, t)


def psi_derivatives(geom, cutoff, t):
    t = _nonneg(t)
    w = geom.omega
    hv, h1, h2 = h(t, w), h_prime(t, w), h_second(t, w)
    e, e1, e2 = eta_derivatives(geom, cutoff, t)
    return hv * e, h1 * e + hv * e1, h2 * e + 2 * h1 * e1 + hv * e2


def psi_forcing(geom, cutoff, t):
    """Right-hand side ``2 h' eta' + h eta''`` of the Cauchy-Euler operator applied to Psi."""
    t = _nonneg(t)
    w = geom.omega
    _, e1, e2 = eta_derivatives(geom, cutoff, t)
    return 2 * h_prime(t, w) * e1 + h(t, w) * e2


def psi_defect(geom, cutoff, t):
    """``Psi'' + mu^2 (1+t)^{-2} Psi - (2 h' eta' + h eta'')``; zero analytically."""
    t = _nonneg(t)
    mu2 = geom.omega**2 + 0.25
    P, _, P2 = psi_derivatives(geom, cutoff, t)
    return P2 + mu2 * P / (1 + t) ** 2 - psi_forcing(geom, cutoff, t)


class ShellFamily:
    """All shells of one frequency with a fixed cutoff, indexed by ``j``."""

    def __init__(self, omega: float, cutoff: CutoffSpec):
        if omega <= 0:
            raise DomainError("omega must be positive")
        self.omega = float(omega)
        self.cutoff = cutoff
        self._cache = {}

    @classmethod
    def for_params(cls, params) -> "ShellFamily":
        return cls(params.omega, CutoffSpec.for_power(float(params.p)))

    def shell(self, j) -> ShellGeometry:
        if j not in self._cache:
            self._cache[j] = shell(j, self.omega)
        return self._cache[j]

    def eta(self, j, t):
        return eta(self.shell(j), self.cutoff, t)

    def eta_prime(self, j, t):
        return eta_prime(self.shell(j), self.cutoff, t)

    def eta_second(self, j, t):
        return eta_second(self.shell(j), self.cutoff, t)

    def psi(self, j, t):
        return psi(self.shell(j), self.cutoff, t)

    def psi_defect(self, j, t):
        return psi_defect(self.shell(j), self.cutoff, t)

    def table(self, j, num=201):
        """Columns ``t, eta, eta_prime, eta_second, psi`` sampled uniformly in sigma over S_j."""
        g = self.shell(j)
        t = g.t_of_sigma(np.linspace(-PI_4, PI_4, num))
        t = np.clip(t, g.S[0], g.S[1])
        e, e1, e2 = eta_derivatives(g, self.cutoff, t)
        return np.column_stack([t, e, e1, e2, h(t, self.omega) * e])


def psi_forcing_weighted(geom: ShellGeometry, cutoff: CutoffSpec, p: float, t):
    """``|2 h' eta' + h eta''|^{p'} eta^{-1/(p-1)}`` extended by zero outside ``S_j``.

    After factoring ``k chi^{k-2}`` out of the bracket the leftover power of
    chi is ``k - 2p' >= 0``.
    """
    t = _nonneg(t)
    k = cutoff.k
    pc = p / (p - 1)
    if k < 2 * pc - 1e-12:
        raise DomainError(f"cutoff power k={k} below 2p' = {2 * pc:.6g}")
    w = geom.omega
    c, dc, d2c = cutoff.chi_derivatives(geom.sigma(t))
    s1, s2 = geom.sigma_prime(t), geom.sigma_second(t)
    hv, h1 = h(t, w), h_prime(t, w)
    bracket = 2 * h1 * c * dc * s1 + hv * ((k - 1) * dc**2 * s1**2 + c * (d2c * s1**2 + dc * s2))
    return k**pc * np.abs(bracket) ** pc * c ** (k - 2 * pc)
