"""Backward solvers for the coupled BSDE with jumps."""
from src.bsde.basis import BasisFamily, RegressionBasis, regress
from src.bsde.picard import picard_subinterval, window_bounds, window_length
from src.bsde.solution import BsdeSolution, MarkBinChannel, QEstimator, StepDiagnostic
from src.bsde.solver import BackwardSolver, field_axes, solve_frozen_nonlocal, solve_lsmc
from src.bsde.truncation import ConvergenceTable, truncation_study

__all__ = [
    "BasisFamily",
    "RegressionBasis",
    "regress",
    "BsdeSolution",
    "MarkBinChannel",
    "QEstimator",
    "StepDiagnostic",
    "BackwardSolver",
    "field_axes",
    "solve_lsmc",
    "solve_frozen_nonlocal",
    "picard_subinterval",
    "window_bounds",
    "window_length",
    "ConvergenceTable",
    "truncation_study",
]
