"""Normalized solutions of coupled fractional Schroedinger systems.

Pseudospectral discretisation on a periodic box: scalar ground state and
its scaled family, fiber dilations and the Pohozaev set, coupling
thresholds, and the two coupled solvers (Newton continuation for small
coupling, Rayleigh-quotient minimisation for large coupling).
"""
from .coupled import (CoupledOpts, CoupledSolution, el_gradient, el_residual, energy,
                      extract_multipliers, lemma44_bound, path_energy_surface,
                      scalar_levels, solve_continuation, solve_min_rayleigh,
                      symmetric_oracle, symmetric_oracle_on_grid)
from .errors import *  # noqa: F401,F403
from .fiber import (dilate, fiber_curve, fiber_energy_scalar, functionals,
                    optimal_fiber_param, project_to_F, rayleigh, system_G)
from .params import ProblemParams, SystemParams
from .scalar import (NonlinearityDescriptor, ScalarGroundState, SolverOpts,
                     closed_forms, compute_constants, gns_ratio, scaled_solution,
                     solve_w0)
from .spectral import Field, Grid, frac_laplacian, make_grid
from .thresholds import Regime, beta1, beta2, classify, symmetric_threshold

__version__ = "0.1.0"
