"""Lifespan against data size.

Six amplitudes over one decade.  Blow-up is detected when sup|u| passes 10^6
times the data size; each run continues to ten times that level to measure how
much the detection time depends on the threshold.  The log-log slope of the detection time is compared with the
exponent sigma from the polynomial.
"""

import numpy as np

from tricomi_lab import ProblemParams, sigma_alpha
from tricomi_lab import experiments as ex

P = ProblemParams(n=1, ell=-0.5, mu2=0.5, p=2)
fit = ex.lifespan_sweep(P, np.geomspace(0.05, 0.5, 6), dr=1 / 32, workers=2)
for eps, T, T10 in fit.samples:
    print(f"eps = {eps:.4f}  T_detect = {T:8.4f}  (10x threshold: {T10:8.4f})")
print(f"slope {fit.slope:.4f}, sigma = {float(sigma_alpha(1, -0.5, 0, 2)):.4f}, "
      f"relative difference {fit.rel_error:.1%}, threshold sensitivity {fit.threshold_sensitivity:.1e}")
