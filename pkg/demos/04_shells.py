"""Logarithmic shells and the oscillatory test function.

With omega = 2 pi the first two shells lie before t = 8, so a moderate run
survives both and the integral of (1+t)^{-alpha} |u|^p over each core can be
compared with the lower and upper expressions.
"""

import math

from tricomi_lab import ProblemParams
from tricomi_lab import experiments as ex
from tricomi_lab.geometry import shell
from tricomi_lab.simulator import Grid, InitialData, SolverConfig, run

P = ProblemParams(n=1, ell=-0.5, mu2=4 * math.pi**2 + 0.25, alpha=2, p=3, eps=0.3)
for j in (1, 2):
    g = shell(j, P.omega)
    print(f"j = {j}: R = {g.R:.4f}, S = ({g.S[0]:.4f}, {g.S[1]:.4f}), I = ({g.I[0]:.4f}, {g.I[1]:.4f})")

trace, _ = run(P, InitialData(), Grid.for_run(1.0, -0.5, 7.5, 1 / 128), 7.5, SolverConfig())
print(f"run status: {trace.status.value}")
for j in (1, 2):
    c = ex.shell_check(trace, j)
    d = ex.test_function_identity(trace, j)
    print(f"j = {j}: L = {c.L_j:.4e}, c_fit = {c.c_fit:.4f}, C_fit = {c.C_fit:.4e}, identity defect {d:.2e}")

# The shell integrals of the test-function weights scale like a fixed power of R_j.
s = ex.mj_slopes(ProblemParams(n=1, ell=-0.5, mu2=0.5, p=2))
print(f"omega = 1/2: M_j slope {s.slope_total:.5f} (predicted {s.predicted})")
s = ex.mj_slopes(P)
print(f"omega = 2 pi: M_j slope {s.slope_total:.4f} against R_j, {s.slope_total_shifted:.4f} against 1 + R_j "
      f"(predicted {s.predicted})")
