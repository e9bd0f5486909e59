"""Strauss-type polynomial, regime classification and the damped-to-massed reduction.

The weighted polynomial is

    gamma_alpha(n, l; p) = (n - 1 + l/(1+l)) p^2 - (n + 1 - (3l + 2 alpha)/(1+l)) p - 2.

Blow-up is guaranteed whenever it is negative.  Evaluation is exact for
rational inputs (``int`` / ``fractions.Fraction``) and uses compensated
summation for floats, so that the branch decisions taken by :func:`classify`
do not flip on rounding when the leading coefficient vanishes exactly
(``n(1+l) = 1``).

Note: direct evaluation gives ``gamma_0(n, l; 1) = -4/(1+l)``.  Some write-ups
quote the value ``-6`` for this quantity; only its sign matters for the
classification and the library always uses the direct value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from numbers import Rational
from typing import Optional

from .errors import DomainError, RegimeError

__all__ = [
    "ProblemParams",
    "Hypothesis",
    "RegimeReport",
    "gamma_alpha",
    "strauss_root",
    "root_case",
    "classify",
    "epdt_reduce",
    "theta_alpha",
    "sigma_alpha",
]

# Relative size below which a float coefficient is treated as an exact zero.
_SNAP = 64 * 2.0**-52


def _is_exact(*values) -> bool:
    return all(isinstance(v, Rational) for v in values)


def _sum(terms, exact):
    if exact:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


@dataclass(frozen=True)
class ProblemParams:
    """Parameters ``(n, l, mu^2, alpha, p, eps)`` and optional damping ``beta``.

    ``beta`` is kept as provenance after :func:`epdt_reduce`; ``alpha`` and
    ``mu2`` then already hold the reduced values.
    """

    n: int
    ell: float
    mu2: float
    alpha: float = 0
    p: float = 2
    eps: float = 1
    beta: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if self.ell == -1:
            raise DomainError("ell = -1 is excluded")
        if not self.p > 1:
            raise DomainError(f"p must exceed 1, got {self.p!r}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps!r}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be nonnegative, got {self.alpha!r}")
        if self.beta is not None and self.beta < 0:
            raise DomainError(f"beta must be nonnegative, got {self.beta!r}")

    @property
    def oscillatory(self) -> bool:
        return self.mu2 > Fraction(1, 4)

    @property
    def omega(self) -> float:
        """Log-time frequency sqrt(mu^2 - 1/4) of the Cauchy-Euler profile."""
        if not self.oscillatory:
            raise RegimeError("not oscillatory: mu^2 <= 1/4")
        return math.sqrt(float(self.mu2) - 0.25)

    @property
    def p_conj(self) -> float:
        return float(self.p) / (float(self.p) - 1.0)

    @property
    def delta(self) -> float:
        """Indicial discriminant; equals (1-beta)^2 - 4 mu^2 before reduction."""
        return 1 - 4 * self.mu2

    def require_simulation_range(self):
        if not -1 < self.ell < 0:
            raise DomainError(f"simulation needs -1 < ell < 0, got {self.ell!r}")
        if not self.oscillatory:
            raise RegimeError("not oscillatory: mu^2 <= 1/4")

    def with_eps(self, eps) -> "ProblemParams":
        return replace(self, eps=eps)

    def as_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, Fraction) else v) for k, v in asdict(self).items()}


class Hypothesis(str, enum.Enum):
    H1_all_p = "H1_all_p"
    H2_below_root = "H2_below_root"
    no_blowup_claim = "no_blowup_claim"


@dataclass(frozen=True)
class RegimeReport:
    gamma_value: float
    strauss_root: Optional[float]
    hypothesis: Hypothesis
    sigma_alpha: Optional[float] = None
    theta_alpha: Optional[float] = None
    delta: Optional[float] = None
    root_case: str = ""

    def as_record(self) -> str:
        """Machine-readable ``key=value`` lines."""
        lines = []
        for key in ("gamma_value", "strauss_root", "hypothesis", "sigma_alpha",
                    "theta_alpha", "delta", "root_case"):
            value = getattr(self, key)
            if isinstance(value, Hypothesis):
                value = value.value
            elif value is None:
                value = "none"
            elif isinstance(value, (float, Fraction)):
                value = repr(float(value))
            lines.append(f"{key}={value}")
        return "\n".join(lines)

    def describe(self) -> str:
        text = {
            Hypothesis.H1_all_p: "blow-up for every p > 1",
            Hypothesis.H2_below_root: "blow-up: p lies in the negative range of gamma",
            Hypothesis.no_blowup_claim: "no blow-up claim (gamma >= 0)",
        }[self.hypothesis]
        out = [f"gamma_alpha = {float(self.gamma_value):.12g}", f"regime: {text}"]
        if self.strauss_root is not None:
            out.append(f"Strauss-type root = {float(self.strauss_root):.12g}")
        else:
            out.append(f"no positive root with positive leading coefficient ({self.root_case})")
        if self.sigma_alpha is not None:
            out.append(f"lifespan exponent sigma_alpha = {float(self.sigma_alpha):.12g}")
            out.append(f"shell exponent Theta_alpha = {float(self.theta_alpha):.12g}")
        if self.delta is not None:
            out.append(f"indicial discriminant delta = {float(self.delta):.12g}")
        return "\n".join(out)


def _check_ell(ell):
    if ell == -1:
        raise DomainError("ell = -1 is excluded")


def gamma_alpha(n, ell, alpha, p):
    """Weighted Strauss-type polynomial evaluated at ``p``.

    The correction relative to the classical polynomial is added as one
    term, so ``ell = 0`` reproduces ``(n-1)p^2 - (n+1)p - 2`` bit for bit.
    """
    _check_ell(ell)
    if p < 0:
        raise DomainError("p must be nonnegative")
    exact = _is_exact(n, ell, alpha, p)
    one = Fraction(1) if exact else 1.0
    correction = (ell * p * p + (3 * ell + 2 * alpha) * p) / (one + ell)
    return _sum([(n - 1) * p * p, -(n + 1) * p, -2 * one, correction], exact)


def _family(n, ell, alpha_excess, beta):
    """Coefficients ``(c2, c1)`` of ``g(q) = c2 q^2 - c1 q - 2``.

    ``g`` is gamma with the damping absorbed as a dimension shift
    ``n + beta/(1+l)`` and an extra nonlinearity weight ``alpha_excess``.
    Returns the scaled leading coefficient ``(1+l) c2`` as well, which is
    what the branch decision looks at.
    """
    exact = _is_exact(n, ell, alpha_excess, beta)
    one = Fraction(1) if exact else 1.0
    lead_terms = [n * one, n * ell, beta * one, -one]
    lead_scaled = _sum(lead_terms, exact)
    if not exact and abs(lead_scaled) <= _SNAP * math.fsum(abs(x) for x in lead_terms):
        lead_scaled = 0.0
    c2 = lead_scaled / (one + ell)
    c1 = _sum([n * one, one, (beta - 3 * ell - 2 * alpha_excess) / (one + ell)], exact)
    return c2, c1, lead_scaled


def _positive_root(c2, c1):
    disc = c1 * c1 + 8 * c2
    root = math.sqrt(float(disc))
    if c1 >= 0:
        return (float(c1) + root) / (2 * float(c2))
    return 4.0 / (root - float(c1))


def _negative_beyond_one(c2, c1) -> bool:
    """Whether ``c2 q^2 - c1 q - 2 < 0`` for every ``q > 1``."""
    if c2 > 0:
        return False
    if c2 == 0:
        return c1 >= 0
    g1 = c2 - c1 - 2
    vertex = c1 / (2 * c2)
    if vertex <= 1:
        return g1 <= 0
    return -c1 * c1 / (4 * c2) - 2 < 0


def _root_case(c2, c1) -> str:
    if c2 > 0:
        return "positive_root"
    if _negative_beyond_one(c2, c1):
        return "negative_for_all_p" if c1 >= 0 else "negative_for_all_p_by_discriminant"
    return "sign_depends_on_p"


def root_case(n, ell, alpha) -> str:
    """Which case of the root analysis applies for a constant weight ``alpha``."""
    _check_ell(ell)
    c2, c1, _ = _family(n, ell, alpha, 0)
    return _root_case(c2, c1)


def strauss_root(n, ell, alpha=0):
    """Unique positive root of ``gamma_alpha`` when its leading coefficient is positive.

    Returns ``None`` otherwise; :func:`root_case` tells whether gamma is then
    negative for all ``p > 1``.  ``n`` may be non-integer (shifted dimension).
    """
    _check_ell(ell)
    c2, c1, _ = _family(n, ell, alpha, 0)
    if c2 > 0:
        return _positive_root(c2, c1)
    return None


def theta_alpha(n, ell, alpha, p):
    return (1 + ell) * gamma_alpha(n, ell, alpha, p) / (2 * (p - 1))


def sigma_alpha(n, ell, alpha, p):
    return 2 * p * (p - 1) / ((1 + ell) * gamma_alpha(n, ell, alpha, p))


def classify(params: ProblemParams) -> RegimeReport:
    """Evaluate gamma and decide which blow-up statement applies.

    ``H1_all_p`` is reported when gamma is negative for every ``p > 1`` in the
    parameter family (damping shift included); for the unweighted and the
    damped-reduced equations this is exactly ``n(1+l) + beta <= 1``.
    """
    if not params.oscillatory:
        raise RegimeError("not oscillatory: mu^2 <= 1/4")
    n, ell, alpha, p = params.n, params.ell, params.alpha, params.p
    beta = params.beta if params.beta is not None else 0
    gamma = gamma_alpha(n, ell, alpha, p)

    half = Fraction(1, 2) if _is_exact(alpha, beta, p) else 0.5
    alpha_excess = alpha - beta * (p - 1) * half
    if not _is_exact(alpha, beta, p) and abs(alpha_excess) <= _SNAP * (abs(alpha) + abs(beta) * p):
        alpha_excess = 0
    c2, c1, _ = _family(n, ell, alpha_excess, beta)
    root = _positive_root(c2, c1) if c2 > 0 else None

    if _negative_beyond_one(c2, c1):
        hypothesis = Hypothesis.H1_all_p
    elif gamma < 0:
        hypothesis = Hypothesis.H2_below_root
    else:
        hypothesis = Hypothesis.no_blowup_claim

    sig = th = None
    if gamma < 0:
        th = (1 + ell) * gamma / (2 * (p - 1))
        sig = 2 * p * (p - 1) / ((1 + ell) * gamma)
    delta = params.delta if params.beta is not None else None
    return RegimeReport(gamma, root, hypothesis, sig, th, delta, _root_case(c2, c1))


def epdt_reduce(n, ell, beta, mu2, p, eps=1) -> ProblemParams:
    """Map the damped equation ``w_tt - (1+t)^{2l} Lap w + beta/(1+t) w_t + mu^2/(1+t)^2 w = |w|^p``
    to the massed, weighted form via ``u = (1+t)^{beta/2} w``.

    The result has ``alpha = beta (p-1)/2`` and ``mu2 = mu^2 + beta(2-beta)/4``;
    its ``delta`` property returns the original discriminant.
    """
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    delta = (1 - beta) ** 2 - 4 * mu2
    if delta >= 0:
        raise RegimeError(f"non-oscillatory (delta = {float(delta):.6g} >= 0), out of scope")
    quarter = Fraction(1, 4) if _is_exact(beta, mu2, p) else 0.25
    alpha_b = 2 * quarter * beta * (p - 1)
    mu2_t = mu2 + quarter * beta * (2 - beta)
    return ProblemParams(n=n, ell=ell, mu2=mu2_t, alpha=alpha_b, p=p, eps=eps, beta=beta)
