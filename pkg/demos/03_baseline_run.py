"""One baseline simulation and the functionals that force blow-up.

Q = m int (u_t - (m'/m) u) phi never decreases; F = int u phi and
H = int |u|^p stay above their lower envelopes.  Larger data blow up sooner.
"""

from tricomi_lab import ProblemParams
from tricomi_lab import experiments as ex
from tricomi_lab.adjoint import build_profile
from tricomi_lab.eigenfunction import EigenfunctionEvaluator
from tricomi_lab.simulator import Grid, InitialData, SolverConfig, run

P = ProblemParams(n=1, ell=-0.5, mu2=0.5, p=2, eps=0.1)
t_max = 10.0
prof = build_profile(1.0, P, t_max)
ev = EigenfunctionEvaluator(1, 1.0)

trace, _ = run(P, InitialData(), Grid.for_run(1.0, -0.5, t_max, 1 / 256), t_max, SolverConfig(), prof, ev)
q = ex.verify_Q(trace)
print(f"Q monotone: {q.monotone}, drift {q.drift_rate:.2e} per unit time, "
      f"Q(0)/eps = {q.c0:.8f} vs data integral {q.data_integral:.8f}")
f = ex.verify_F_lower(trace, prof)
h = ex.verify_H_lower(trace)
print(f"F ratio min {f.min_ratio:.3f}, H ratio min {h.min_ratio:.3f} (from t1 = {h.t1})")

# Blow-up times for a few amplitudes.
for eps in (0.5, 0.3, 0.2):
    T = 60.0
    tr, rep = run(P.with_eps(eps), InitialData(), Grid.for_run(1.0, -0.5, T, 1 / 64), T, SolverConfig(sample_every=50))
    print(f"eps = {eps}: {tr.status.value}, T_detect = {rep.T_detect:.4f}")
