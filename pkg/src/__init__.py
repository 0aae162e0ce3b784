"""Coupled BSDEs with jumps: simulation, backward solvers and executable checks."""

__version__ = "0.1.0"
