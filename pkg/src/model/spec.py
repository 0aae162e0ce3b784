"""Problem datum for the coupled BSDE with jumps."""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from src.levy.measure import LevyMeasure


class CouplingMode(str, Enum):
    """How the jump channel enters the generator."""

    GAMMA_INTEGRAL = "gamma_integral"   # q = ∫ γ_i ζ dλ
    NORM_COUPLING = "norm_coupling"     # q = ‖ζ‖_{L²(λ)}


@dataclass(frozen=True)
class Dims:
    k: int  # state
    d: int  # Brownian
    m: int  # system size
    l: int  # marks

    def as_dict(self) -> Dict[str, int]:
        return {"k": self.k, "d": self.d, "m": self.m, "l": self.l}


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """All coefficients of the forward SDE and the backward system.

    Callables broadcast over leading axes:
        b(t, x)            x (..., k)                -> (..., k)
        sigma(t, x)        x (..., k)                -> (..., k, d)
        beta(t, x, e)      x (..., k), e (..., l)    -> (..., k)
        gamma[i](t, x, e)  x (..., k), e (..., l)    -> (...)
        g[i](x)            x (..., k)                -> (...)
        h[i](t, x, y, z, q) y (..., m), z (..., d), q (...) -> (...)
    Callables must be safe to call concurrently.
    """

    name: str
    dims: Dims
    T: float
    b: Callable
    sigma: Callable
    beta: Callable
    g: Tuple[Callable, ...]
    h: Tuple[Callable, ...]
    gamma: Tuple[Callable, ...]
    measure: LevyMeasure
    coupling_mode: CouplingMode = CouplingMode.GAMMA_INTEGRAL
    beta_state_independent: bool = False
    params: Dict[str, Any] = field(default_factory=dict)
    description: str = ""
    closed_form: Optional[Callable] = None   # (t, x (..., k)) -> (..., m)

    def __post_init__(self):
        m = self.dims.m
        if len(self.g) != m or len(self.h) != m or len(self.gamma) != m:
            raise ValueError(f"{self.name}: need {m} callables for each of g, h, gamma")
        if self.measure.dim != self.dims.l:
            raise ValueError(f"{self.name}: measure dimension {self.measure.dim} != l={self.dims.l}")
        if self.T <= 0:
            raise ValueError(f"{self.name}: horizon must be positive")

    def terminal(self, x: np.ndarray) -> np.ndarray:
        """(g^1(x), ..., g^m(x)) stacked on the last axis."""
        return np.stack([np.broadcast_to(gi(x), x.shape[:-1]) for gi in self.g], axis=-1)

    def generator(self, t: float, x: np.ndarray, y: np.ndarray, z: np.ndarray, q: np.ndarray) -> np.ndarray:
        """All h^(i) at once.

        Args:
            x: (..., k); y: (..., m); z: (..., m, d); q: (..., m)

        Returns:
            (..., m)
        """
        return np.stack([
            np.broadcast_to(hi(t, x, y, z[..., i, :], q[..., i]), x.shape[:-1])
            for i, hi in enumerate(self.h)
        ], axis=-1)

    def with_params(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "dims": self.dims.as_dict(),
            "T": self.T,
            "coupling_mode": self.coupling_mode.value,
            "beta_state_independent": self.beta_state_independent,
            "params": dict(self.params),
            "measure": self.measure.describe(),
            "closed_form": self.closed_form is not None,
            "description": self.description,
        }


def as_points(x: Sequence[float], k: int) -> np.ndarray:
    """Coerce a starting point to shape (k,)."""
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape != (k,):
        raise ValueError(f"starting point has shape {arr.shape}, expected ({k},)")
    return arr
