"""Numerical laboratory for the one-dimensional fractional Caffarelli-Kohn-Nirenberg
inequality and its Onofri-type limit."""

from .errors import (CknError, DomainError, FitFailed, InvalidSchedule, NonConvergent, NotConverged, ParseError,
                     PositivityLost, SingularityTooStrong, UnsupportedSupport, WindowViolation, ZeroDenominator)
from .quadrature import GridFunction, QuadratureConfig, QuadResult, geometric_nodes, integrate_line, pv_integrate
from .operators import (CknParams, apply_frac_laplacian, apply_L, c_gamma_alpha, c_hardy, kelvin_invert,
                        sigma_gamma, weighted_norm_sq)
from .energy import EnergyReport, MinimizerResult, SolverKnobs, energy, energy_tilde, minimize
from .liouville import LiouvilleParams, eta_family, fit_rho, kappa_exact, mass, residual
from .limit import LadderReport, ScheduleParams, make_schedule, run_ladder
from .onofri import GapReport, counterexample_gap, onofri_gap

__version__ = "0.1.0"
