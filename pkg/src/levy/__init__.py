"""Lévy measures: validation, truncation, sampling and quadrature."""
from src.levy.measure import LevyMeasure, TruncatedMeasure, truncate
from src.levy.quadrature import ValidationReport, build_rule, integrate, validate
from src.levy.registry import MEASURES, build_measure, finite_uniform, tempered_stable, zero
from src.levy.sampling import sample_jumps, sample_marks

__all__ = [
    "LevyMeasure",
    "TruncatedMeasure",
    "ValidationReport",
    "truncate",
    "validate",
    "integrate",
    "build_rule",
    "sample_jumps",
    "sample_marks",
    "MEASURES",
    "build_measure",
    "tempered_stable",
    "finite_uniform",
    "zero",
]
