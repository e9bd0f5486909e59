import math
import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from tricomi_lab.errors import DomainError, RegimeError
from tricomi_lab.experiments import theta_direct
from tricomi_lab.regime import (Hypothesis, ProblemParams, classify, epdt_reduce, gamma_alpha, root_case,
                                sigma_alpha, strauss_root, theta_alpha)

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=50)
ells = st.fractions(min_value=Fraction(-99, 100), max_value=Fraction(-1, 100), max_denominator=100)
alphas = st.fractions(min_value=0, max_value=5, max_denominator=20)
ps = st.fractions(min_value=Fraction(101, 100), max_value=8, max_denominator=100)
dims = st.integers(min_value=1, max_value=8)


def gamma_oracle(n, ell, alpha, p):
    """Sympy evaluation of (n-1+l/(1+l)) p^2 - (n+1-(3l+2a)/(1+l)) p - 2."""
    n, ell, alpha, p = (sp.nsimplify(x) for x in (n, ell, alpha, p))
    return (n - 1 + ell / (1 + ell)) * p**2 - (n + 1 - (3 * ell + 2 * alpha) / (1 + ell)) * p - 2


# ---------------------------------------------------------------- gamma

def test_gamma_classical_n3_l0():
    for p in (Fraction(3, 2), 2, Fraction(7, 3), 5):
        assert gamma_alpha(3, 0, 0, p) == 2 * p * p - 4 * p - 2


def test_gamma_n2_half_is_minus_14():
    assert gamma_alpha(2, Fraction(-1, 2), 0, 2) == -14
    assert gamma_oracle(2, Fraction(-1, 2), 0, 2) == -14


def test_gamma_baseline_value():
    # leading coefficient -1, linear coefficient 5
    assert gamma_alpha(1, Fraction(-1, 2), 0, 2) == -16
    assert gamma_oracle(1, Fraction(-1, 2), 0, 2) == -16


def test_gamma_ell_minus_one_rejected():
    with pytest.raises(DomainError):
        gamma_alpha(2, -1, 0, 2)


@given(dims, rationals.filter(lambda x: x != -1), alphas, ps)
def test_gamma_matches_symbolic_oracle(n, ell, alpha, p):
    assert gamma_alpha(n, ell, alpha, p) == gamma_oracle(n, ell, alpha, p)


@given(dims, st.floats(min_value=0.0, max_value=50.0))
def test_gamma_reduces_to_strauss_at_l0(n, p):
    exact = (n - 1) * Fraction(p) ** 2 - (n + 1) * Fraction(p) - 2
    assert abs(gamma_alpha(n, 0.0, 0.0, p) - float(exact)) <= 1e-15 * max(1.0, n * p * p)


@given(dims, ells, alphas)
def test_gamma_at_p0_and_p1(n, ell, alpha):
    assert gamma_alpha(n, ell, alpha, 0) == -2
    assert gamma_alpha(n, ell, 0, 1) == Fraction(-4) / (1 + ell)
    assert gamma_alpha(n, float(ell), float(alpha), 0.0) == -2


# ---------------------------------------------------------------- root

def test_strauss_root_classical():
    assert strauss_root(3, 0, 0) == pytest.approx(1 + math.sqrt(2), rel=1e-15)


def test_strauss_root_none_cases():
    assert strauss_root(1, Fraction(-1, 2), 0) is None
    assert root_case(1, Fraction(-1, 2), 0) == "negative_for_all_p"
    assert strauss_root(2, Fraction(-1, 2), 0) is None
    # leading coefficient exactly 0, gamma = -6p - 2
    assert root_case(2, Fraction(-1, 2), 0) == "negative_for_all_p"


@given(dims, ells, alphas)
def test_strauss_root_residual_and_sign_change(n, ell, alpha):
    r = strauss_root(n, ell, alpha)
    if r is None:
        return
    assert abs(gamma_alpha(n, float(ell), float(alpha), r)) <= 1e-10 * max(1.0, r * r)
    lo, hi = r * (1 - 1e-6), r * (1 + 1e-6)
    assert gamma_alpha(n, float(ell), float(alpha), lo) < 0 < gamma_alpha(n, float(ell), float(alpha), hi)


# ---------------------------------------------------------------- classify

def test_classify_baseline():
    r = classify(ProblemParams(n=1, ell=Fraction(-1, 2), mu2=Fraction(1, 2), p=2))
    assert r.hypothesis is Hypothesis.H1_all_p
    assert r.gamma_value == -16
    assert r.sigma_alpha == Fraction(-1, 2)
    assert r.theta_alpha == -4


def test_classify_h2_branch():
    r = classify(ProblemParams(n=3, ell=-0.1, mu2=1.0, p=1.5))
    root = strauss_root(3, -0.1, 0)
    assert root > 1.5
    assert r.hypothesis is Hypothesis.H2_below_root
    assert r.strauss_root == pytest.approx(root)
    assert r.sigma_alpha < 0 and r.theta_alpha < 0


def test_classify_no_claim_above_root():
    r = classify(ProblemParams(n=3, ell=-0.1, mu2=1.0, p=4))
    assert r.hypothesis is Hypothesis.no_blowup_claim
    assert r.sigma_alpha is None and r.theta_alpha is None


def test_classify_rejects_non_oscillatory():
    with pytest.raises(RegimeError):
        classify(ProblemParams(n=1, ell=-0.5, mu2=0.25, p=2))


def test_boundary_n_one_plus_l_equal_one_is_h1():
    # n (1 + l) = 1 in floating point: 2 * (1 - 0.5)
    r = classify(ProblemParams(n=2, ell=-0.5, mu2=0.5, p=3.0))
    assert r.hypothesis is Hypothesis.H1_all_p
    r = classify(ProblemParams(n=4, ell=-0.75, mu2=0.5, p=7.0))
    assert r.hypothesis is Hypothesis.H1_all_p


def test_record_fields():
    rec = classify(ProblemParams(n=1, ell=-0.5, mu2=0.5, p=2)).as_record()
    keys = [line.split("=")[0] for line in rec.splitlines()]
    assert keys == ["gamma_value", "strauss_root", "hypothesis", "sigma_alpha", "theta_alpha", "delta", "root_case"]


@given(dims, ells, ps, st.floats(min_value=1e-6, max_value=1e6))
def test_classify_eps_invariant(n, ell, p, scale):
    a = classify(ProblemParams(n=n, ell=ell, mu2=1, p=p, eps=1))
    b = classify(ProblemParams(n=n, ell=ell, mu2=1, p=p, eps=scale))
    assert a == b


@given(dims, ells, alphas, ps)
def test_sigma_theta_negative_iff_gamma_negative(n, ell, alpha, p):
    r = classify(ProblemParams(n=n, ell=ell, mu2=1, alpha=alpha, p=p))
    if r.gamma_value < 0:
        assert r.sigma_alpha < 0 and r.theta_alpha < 0
        assert r.sigma_alpha == p / r.theta_alpha
    else:
        assert r.sigma_alpha is None and r.theta_alpha is None


# ---------------------------------------------------------------- reduction

def test_epdt_beta_zero_identity():
    P = epdt_reduce(2, Fraction(-1, 3), 0, Fraction(3, 4), 3)
    assert (P.alpha, P.mu2) == (0, Fraction(3, 4))


def test_epdt_example_values():
    P = epdt_reduce(1, Fraction(-1, 2), 1, 1, 3)
    assert P.delta == -4 and P.mu2 == Fraction(5, 4) and P.alpha == 1


def test_epdt_mu2_small_still_oscillatory():
    P = epdt_reduce(1, Fraction(-1, 2), 1, Fraction(1, 5), 3)
    assert P.delta == Fraction(-4, 5)
    assert P.mu2 == Fraction(9, 20) and P.oscillatory


def test_epdt_non_oscillatory_rejected():
    with pytest.raises(RegimeError):
        epdt_reduce(1, Fraction(-1, 2), 1, Fraction(-1, 5), 3)
    with pytest.raises(DomainError):
        epdt_reduce(1, Fraction(-1, 2), -1, 1, 3)


@given(dims, ells, st.fractions(min_value=0, max_value=4, max_denominator=20), ps)
def test_epdt_equals_shifted_dimension_polynomial(n, ell, beta, p):
    P = epdt_reduce(n, ell, beta, 1 + beta * beta, p)
    m = n + beta / (1 + ell)
    shifted = (m - 1 + ell / (1 + ell)) * p * p - (m + 1 - 3 * ell / (1 + ell)) * p - 2
    assert gamma_alpha(P.n, P.ell, P.alpha, p) == shifted


def test_gamma_of_reduced_at_p1():
    for beta in (Fraction(1, 2), 1, 3):
        P = epdt_reduce(2, Fraction(-1, 2), beta, 5, 1 + Fraction(1, 1000))
        assert gamma_alpha(2, P.ell, beta * 0, 1) == Fraction(-4) / (1 + P.ell)


# ---------------------------------------------------------------- exponents

def test_theta_identity_symbolic():
    n, ell, alpha, p = sp.symbols("n ell alpha p")
    gamma = (n - 1 + ell / (1 + ell)) * p**2 - (n + 1 - (3 * ell + 2 * alpha) / (1 + ell)) * p - 2
    lhs = theta_direct(n, ell, alpha, p)
    assert sp.simplify(lhs - (1 + ell) * gamma / (2 * (p - 1))) == 0


@given(dims, ells, alphas, ps)
def test_theta_identity_sampled(n, ell, alpha, p):
    assert theta_direct(n, ell, alpha, p) == theta_alpha(n, ell, alpha, p)


def test_sigma_formula_baseline():
    # 2 p (p-1) / ((1+l) gamma) = 4 / (0.5 * -16)
    assert sigma_alpha(1, Fraction(-1, 2), 0, 2) == Fraction(-1, 2)


def test_params_validation():
    for bad in (dict(n=0), dict(p=1), dict(eps=0), dict(alpha=-1), dict(ell=-1)):
        kw = dict(n=1, ell=-0.5, mu2=1, p=2)
        kw.update(bad)
        with pytest.raises(DomainError):
            ProblemParams(**kw)
    with pytest.raises(DomainError):
        ProblemParams(n=1, ell=0.5, mu2=1, p=2).require_simulation_range()


def test_random_branch_assignment_small_sample():
    rng = random.Random(7)
    for _ in range(20):
        n = rng.randint(1, 5)
        ell = Fraction(-rng.randint(1, 99), 100)
        r = classify(ProblemParams(n=n, ell=ell, mu2=1, p=Fraction(rng.randint(101, 500), 100)))
        assert (r.hypothesis is Hypothesis.H1_all_p) == (n * (1 + ell) <= 1)
