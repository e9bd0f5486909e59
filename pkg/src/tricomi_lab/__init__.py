"""Numerical laboratory for blow-up of Tricomi-type semilinear waves with
scale-invariant oscillatory mass.

Modules: :mod:`regime` (Strauss-type polynomial and classification),
:mod:`geometry` (logarithmic shells and test functions), :mod:`adjoint`
(Riccati construction of the temporal adjoint profile), :mod:`eigenfunction`
(the spherical exponential eigenfunction), :mod:`simulator` (radial
leapfrog solver with blow-up detection) and :mod:`experiments` (verification
campaigns).  ``python -m tricomi_lab`` runs the command line front end.
"""

from .errors import ConfigurationError, DomainError, NumericalError, RegimeError
from .regime import ProblemParams, classify, epdt_reduce, gamma_alpha, sigma_alpha, theta_alpha

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "DomainError", "NumericalError", "RegimeError", "ProblemParams",
           "classify", "epdt_reduce", "gamma_alpha", "sigma_alpha", "theta_alpha"]
