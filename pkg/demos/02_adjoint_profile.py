"""The decaying adjoint profile m and the eigenfunction phi.

m solves m'' = (lam^2 (1+t)^{2l} - mu^2 (1+t)^{-2}) m, positive and
decreasing.  It is built from a Riccati fixed point at late times and
continued backwards; an independent backward integration seeded with the WKB
asymptotics serves as a cross-check.
"""

import numpy as np

from tricomi_lab import ProblemParams
from tricomi_lab import adjoint as adj
from tricomi_lab.eigenfunction import EigenfunctionEvaluator

P = ProblemParams(n=1, ell=-0.5, mu2=0.5, p=2)
lam = 1.0

sol = adj.solve_riccati(lam, P, 200.0)
print(f"contraction time T = {sol.T:.4g}, largest measured contraction factor {sol.contraction_ratios.max():.3f}")

prof = adj.build_profile(lam, P, 200.0)
orc = adj.oracle_direct(lam, P, 200.0)
print(f"Riccati profile vs WKB-seeded oracle: {adj.compare_profiles(prof, orc):.2e} relative")

# m' / m approaches -lam a(t): the ratio below tends to 1.
t = np.array([1.0, 10.0, 50.0, 200.0])
log_m, ratio = prof.evaluate(t)
print("t       log m      -m'/(lam a m)")
for ti, lm, r in zip(t, log_m, ratio):
    print(f"{ti:6.1f}  {lm:9.4f}  {r / (lam * (1 + ti) ** -0.5):.5f}")

# phi grows like e^{lam r} r^{-(n-1)/2}: phi (1+r)^{(n-1)/2} e^{-lam r} starts at
# |S^{n-1}|, decreases, and settles at (2 pi)^{(n-1)/2}.
for n in (1, 2, 3):
    ev = EigenfunctionEvaluator(n, lam)
    at = [float(np.exp(ev.log_bound_ratio(r))) for r in (0.0, 20.0, 40.0, 1e4)]
    print(f"n = {n}: ratio at r = 0, 20, 40, 1e4: " + ", ".join(f"{x:.5f}" for x in at)
          + f"  (limit {(2 * np.pi) ** ((n - 1) / 2):.5f})")
