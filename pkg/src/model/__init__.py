"""Problem data, composed generators and assumption checks."""
from src.model.assumptions import (
    AssumptionCheck,
    AssumptionReport,
    GrowthFit,
    LipschitzEstimate,
    check_assumptions,
    estimate_lipschitz,
    fit_growth_class,
    max_stable_dt,
)
from src.model.generator import (
    MarkFunction,
    compose_generator,
    coupling_scalar,
    generator_lipschitz_in_zeta,
    l2_norm,
)
from src.model.spec import CouplingMode, Dims, ModelSpec
from src.model.zoo import ZOO, build_model, coupled_sine, linear_additive, norm_coupling_demo

__all__ = [
    "ModelSpec",
    "Dims",
    "CouplingMode",
    "MarkFunction",
    "compose_generator",
    "coupling_scalar",
    "generator_lipschitz_in_zeta",
    "l2_norm",
    "AssumptionCheck",
    "AssumptionReport",
    "GrowthFit",
    "LipschitzEstimate",
    "check_assumptions",
    "estimate_lipschitz",
    "fit_growth_class",
    "max_stable_dt",
    "ZOO",
    "build_model",
    "linear_additive",
    "coupled_sine",
    "norm_coupling_demo",
]
