"""Independent reference computations: Monte Carlo and finite differences."""

from .finite_difference import (Boxcar, FDOperator, FDSolution, GridSpec, PiecewiseConstant,
                                fd_bmd_solve, fd_flux_period, fd_kstar)
from .montecarlo import MCResult, hit_probability, mc_green, walk_to_boundary

__all__ = ["Boxcar", "FDOperator", "FDSolution", "GridSpec", "PiecewiseConstant", "fd_bmd_solve",
           "fd_flux_period", "fd_kstar", "MCResult", "hit_probability", "mc_green",
           "walk_to_boundary"]
