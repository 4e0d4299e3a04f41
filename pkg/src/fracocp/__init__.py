"""Finite elements for sparse optimal control of fractional semilinear elliptic problems."""

from .assembly import (OperatorSet, QuadratureConfig, assemble_fractional_stiffness, assemble_load,
                       assemble_mass, normalization_constant)
from .control import (FULLY_DISCRETE, SEMIDISCRETE, ControlState, ProblemSpec, solve_ocp,
                      stationarity_residual)
from .harness import RunConfig, emit_plot_data, run_experiment
from .manufactured import ExactSolution, build_benchmark, eoc, error_hs, error_l2
from .mesh import DofMap, TriMesh, build_dofmap, make_disc_mesh, refine
from .solvers import NonlinearitySpec, solve_adjoint, solve_linearized, solve_state

__version__ = "0.1.0"

__all__ = [
    "OperatorSet", "QuadratureConfig", "assemble_fractional_stiffness", "assemble_load",
    "assemble_mass", "normalization_constant", "FULLY_DISCRETE", "SEMIDISCRETE", "ControlState",
    "ProblemSpec", "solve_ocp", "stationarity_residual", "RunConfig", "emit_plot_data",
    "run_experiment", "ExactSolution", "build_benchmark", "eoc", "error_hs", "error_l2", "DofMap",
    "TriMesh", "build_dofmap", "make_disc_mesh", "refine", "NonlinearitySpec", "solve_adjoint",
    "solve_linearized", "solve_state",
]
