"""Executable checks over solver outputs."""
from src.verify.checks import (
    SolveSettings,
    feynman_kac_probe,
    frozen_iteration,
    jump_representation_check,
    jump_representation_error,
    simulate_and_solve,
    u_class_check,
    uniqueness_fixed_point,
    up_moment_check,
    zero_field,
)
from src.verify.report import CheckReport, digest_of
from src.verify.studies import (
    contraction_ratio,
    estimator_agreement_check,
    jump_representation_refinement,
    moment_estimate_check,
    norm_coupling_consistency_check,
    oracle_agreement_check,
    picard_contraction_check,
    truncation_convergence_check,
    uniqueness_from_starts,
)

__all__ = [
    "CheckReport",
    "digest_of",
    "SolveSettings",
    "simulate_and_solve",
    "zero_field",
    "frozen_iteration",
    "feynman_kac_probe",
    "jump_representation_check",
    "jump_representation_error",
    "u_class_check",
    "up_moment_check",
    "uniqueness_fixed_point",
    "moment_estimate_check",
    "truncation_convergence_check",
    "picard_contraction_check",
    "contraction_ratio",
    "oracle_agreement_check",
    "estimator_agreement_check",
    "norm_coupling_consistency_check",
    "jump_representation_refinement",
    "uniqueness_from_starts",
]
