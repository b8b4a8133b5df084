"""Linearized two-phase Stefan problem with kinetic undercooling and surface tension.

Spectral (Fourier in x, Laplace in t) and finite-difference solvers for the
linear interface problem, anisotropic Slobodeckij norms, sector probes of the
interface symbol and sweeps over the parameters ``(delta, sigma)``.
"""

from .model import (CompatibilityError, DataTuple, Grids, ParameterError, PhysicalParams,
                    SolutionTriple, make_compatible_data, make_grids, seed_family, validate_params)
from .spectral import SolverConfig, lts_residuals, solve_full, solve_zero_trace
from .transforms import ContourSpec, inverse_laplace

__all__ = ["CompatibilityError", "ContourSpec", "DataTuple", "Grids", "ParameterError",
           "PhysicalParams", "SolutionTriple", "SolverConfig", "inverse_laplace", "lts_residuals",
           "make_compatible_data", "make_grids", "seed_family", "solve_full", "solve_zero_trace",
           "validate_params"]
__version__ = "0.1.0"
