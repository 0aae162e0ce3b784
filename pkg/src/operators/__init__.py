"""Value fields and the nonlocal operators acting on them."""
from src.operators.nonlocal_ops import (
    NonlocalOperator,
    check_derivatives,
    eval_B,
    eval_B_norm,
    eval_K,
    taylor_radius,
)
from src.operators.tabulation import evaluate_chunked, lattice_axes, tabulate
from src.operators.value_field import FunctionField, GrowthEnvelope, ValueField, lattice_points, linear_combination

__all__ = [
    "ValueField",
    "FunctionField",
    "GrowthEnvelope",
    "lattice_points",
    "linear_combination",
    "NonlocalOperator",
    "check_derivatives",
    "taylor_radius",
    "eval_B",
    "eval_B_norm",
    "eval_K",
    "tabulate",
    "lattice_axes",
    "evaluate_chunked",
]
