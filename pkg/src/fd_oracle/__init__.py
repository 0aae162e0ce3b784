"""Finite-difference oracle for one-dimensional problems."""
from src.fd_oracle.problem import FdProblem
from src.fd_oracle.residual import ViscosityDefinition, residual
from src.fd_oracle.solver import explicit_terms, solve_fd

__all__ = ["FdProblem", "solve_fd", "explicit_terms", "residual", "ViscosityDefinition"]
