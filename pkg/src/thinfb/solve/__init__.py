"""Linear solves, free-boundary descent, symmetrization and rescaling."""

from .fieldio import FieldFormatError, dump_field, load_field
from .linear import (CoefficientField, DirichletForm, LinearSolver, SolverError, SolverSettings,
                     harmonic_replacement, linearized_solve, linearized_weight)
from .support import (DescentResult, InfeasibleConstraintError, ball_competitor, ball_free_nodes,
                      generate_almost_minimizer, minimize_energy, minimize_given_support, touches)
from .transforms import blowup_rescale, even_part

__all__ = [
    "CoefficientField", "DescentResult", "DirichletForm", "FieldFormatError",
    "InfeasibleConstraintError", "LinearSolver", "SolverError", "SolverSettings",
    "ball_competitor", "ball_free_nodes", "blowup_rescale", "dump_field", "even_part",
    "generate_almost_minimizer", "harmonic_replacement", "linearized_solve",
    "linearized_weight", "load_field", "minimize_energy", "minimize_given_support", "touches",
]
