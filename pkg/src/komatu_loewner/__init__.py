"""Komatu-Loewner evolution on parallel slit half-planes.

Submodules
----------
geometry     slit configurations, sheet points and square-root charts
measures     boundary measures (atoms plus piecewise-linear densities)
kernel       the BMD complex Poisson kernel by least squares
potential    Green function, harmonic basis, period matrix, ``G*`` and ``K*``
maps         integral representation, angular residues, measure recovery
drivers      measure-valued driving processes
flow         forward, backward and reversed Komatu-Loewner flows
oracle       Monte Carlo and finite-difference reference solvers
validation   the acceptance suite
"""

from .drivers import DriverSpec, DrivingProcess, sample
from .flow import (FlowTrajectory, SolveOptions, evolution_family_report, flow_map, solve_backward,
                   solve_forward, solve_reversed, trace_point)
from .geometry import SheetPoint, SlitConfig, eta, l_half_gap, r_out, slit_distance
from .kernel import (KernelSolver, PoissonKernelModel, build_kernel, eval_kstar, eval_psi,
                     koebe_bound_check, residue_at_infinity)
from .maps import IntegralRepMap, angular_residue, apply_integral_rep, recover_measure
from .measures import BoundaryMeasure

__version__ = "0.1.0"

__all__ = [
    "SlitConfig", "SheetPoint", "slit_distance", "eta", "r_out", "l_half_gap",
    "BoundaryMeasure", "KernelSolver", "PoissonKernelModel", "build_kernel", "eval_psi",
    "eval_kstar", "residue_at_infinity", "koebe_bound_check", "IntegralRepMap",
    "apply_integral_rep", "angular_residue", "recover_measure", "DriverSpec", "DrivingProcess",
    "sample", "SolveOptions", "FlowTrajectory", "solve_forward", "solve_reversed",
    "solve_backward", "flow_map", "trace_point", "evolution_family_report",
]
