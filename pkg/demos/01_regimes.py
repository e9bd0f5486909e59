"""Where does blow-up hold?

Walk through the Strauss-type polynomial for the baseline problem, then scan
the power p for a few dimensions and print which statement applies.
"""

from fractions import Fraction

import numpy as np

from tricomi_lab import ProblemParams, classify, epdt_reduce, gamma_alpha
from tricomi_lab.regime import strauss_root

# Baseline: one space dimension, speed (1+t)^{-1/2}, mass 1/2 (omega = 1/2).
base = ProblemParams(n=1, ell=Fraction(-1, 2), mu2=Fraction(1, 2), p=2)
print(classify(base).describe())
print()

# For n(1+l) <= 1 the polynomial is negative for every p > 1; above that line
# there is a positive root and blow-up holds below it.
print(" n     l   root(alpha=0)  root(alpha=1)")
for n in (1, 2, 3, 4):
    for ell in (Fraction(-3, 4), Fraction(-1, 4), Fraction(-1, 10)):
        roots = [strauss_root(n, ell, a) for a in (0, 1)]
        text = ["   all p > 1 " if r is None else f"{float(r):13.6f}" for r in roots]
        print(f"{n:2d} {float(ell):5.2f}  {text[0]}  {text[1]}")
print()

# The sign of gamma along p for n = 3, l = -1/10.
ps = np.linspace(1.05, 4.0, 8)
print("p      gamma      branch")
for p in ps:
    r = classify(ProblemParams(n=3, ell=-0.1, mu2=1.0, p=float(p)))
    print(f"{p:4.2f}  {float(r.gamma_value):9.4f}  {r.hypothesis.value}")
print()

# A damped equation maps onto the weighted one: alpha = beta (p-1)/2 and the
# mass shifts by beta(2-beta)/4.
P = epdt_reduce(2, Fraction(-1, 2), Fraction(1, 2), 1, Fraction(5, 2))
print(f"damped -> weighted: alpha = {P.alpha}, mu2 = {P.mu2}, gamma = {gamma_alpha(P.n, P.ell, P.alpha, P.p)}")
print(classify(P).describe())
