"""Lévy measure and its truncations."""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, Tuple

import numpy as np

from src.levy import quadrature
from src.utils.errors import InfiniteMass


@dataclass(frozen=True, eq=False)
class LevyMeasure:
    """A σ-finite measure on R^l minus the origin, given by a density.

    The density maps marks of shape (..., l) to values of shape (...). It may
    blow up at the origin like |e|^(-l-alpha) with alpha = singularity_exponent.
    Marks are assumed isotropic in direction when l > 1.
    """

    dim: int
    density: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    singularity_exponent: float = 0.0
    name: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)
    breakpoints: Tuple[float, ...] = (1.0,)
    bounded_support: bool = False
    is_zero: bool = False
    cache: Dict[Any, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"mark dimension must be positive, got {self.dim}")
        if self.support_radius <= 0:
            raise ValueError(f"support radius must be positive, got {self.support_radius}")
        if not 0.0 <= self.singularity_exponent < 2.0:
            raise ValueError(f"singularity exponent must lie in [0, 2), got {self.singularity_exponent}")

    @cached_property
    def is_infinite_activity(self) -> bool:
        if self.is_zero:
            return False
        return quadrature.infinite_activity(self)

    def mass(self, r_lo: float, r_hi: float = None) -> float:
        """λ(r_lo ≤ |e| ≤ r_hi)."""
        if r_lo <= 0.0 and self.is_infinite_activity:
            raise InfiniteMass(f"{self.name} has infinite mass near the origin", measure=self.name)
        return float(quadrature.integrate(self, lambda e: np.ones(len(e)), 0, r_lo, r_hi))

    def tail_mass(self, k: int) -> float:
        """∫_{|e|<1/k} (1∧|e|²) λ(de): what truncation at level k leaves out."""
        if k < 1:
            raise ValueError(f"truncation level must be ≥ 1, got {k}")
        key = ("tail_mass", int(k))
        if key not in self.cache:
            self.cache[key] = float(quadrature.integrate(
                self, lambda e: np.minimum(1.0, np.sum(e * e, axis=-1)), 2, 0.0, 1.0 / k))
        return self.cache[key]

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "dim": self.dim,
            "params": dict(self.params),
            "support_radius": self.support_radius,
            "singularity_exponent": self.singularity_exponent,
            "infinite_activity": self.is_infinite_activity,
        }


@dataclass(frozen=True, eq=False)
class TruncatedMeasure:
    """λ restricted to {|e| ≥ 1/k}; finite mass for every k."""

    base: LevyMeasure
    k: int
    total_mass: float

    @property
    def threshold(self) -> float:
        return 1.0 / self.k

    @property
    def dim(self) -> int:
        return self.base.dim

    def integrate(self, phi: Callable[[np.ndarray], np.ndarray], r_hi: float = None):
        """∫ φ dλ_k for φ of shape (q, l) -> (..., q)."""
        return quadrature.integrate(self.base, phi, 0, self.threshold, r_hi)

    def rule(self) -> quadrature.QuadratureRule:
        return quadrature.build_rule(self.base, self.threshold)


def truncate(measure: LevyMeasure, k: int) -> TruncatedMeasure:
    """Restrict λ to {|e| ≥ 1/k}."""
    if k < 1:
        raise ValueError(f"truncation level must be ≥ 1, got {k}")
    key = ("truncate", int(k))
    if key not in measure.cache:
        if measure.is_zero:
            total = 0.0
        else:
            total = float(quadrature.integrate(measure, lambda e: np.ones(len(e)), 0, 1.0 / k))
        if not np.isfinite(total):
            raise InfiniteMass(f"λ_{k} of {measure.name} has no finite mass", measure=measure.name, k=k)
        measure.cache[key] = TruncatedMeasure(measure, int(k), total)
    return measure.cache[key]
