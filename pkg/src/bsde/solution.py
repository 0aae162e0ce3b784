"""Solver outputs."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from src.bsde.basis import FittedBasis
from src.operators.value_field import ValueField
from src.sde_sim.grid import TimeGrid


class QEstimator(str, Enum):
    REPRESENTATION = "representation"
    MARTINGALE = "martingale"
    FROZEN = "frozen"       # coupling channel taken from an exogenous field


@dataclass
class StepDiagnostic:
    step: int
    condition: float
    residual: List[float]           # RMS of y_{j+1} - E_j per component
    field_residual: List[float]     # RMS of y_j - regressed field at X_j
    implicit_passes: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "condition": self.condition,
            "residual": self.residual,
            "field_residual": self.field_residual,
            "implicit_passes": self.implicit_passes,
        }


@dataclass
class MarkBinChannel:
    """Per-mark-bin regressed jump fields U_b^i(t_j, x) from the martingale estimator.

    Bins partition {|e| ≥ 1/k} by radius (and by sign when l = 1); weights[b] = λ_k(bin b).
    """

    radial_edges: np.ndarray
    signed: bool
    weights: np.ndarray
    bases: Dict[int, FittedBasis] = field(default_factory=dict)
    coefs: Dict[int, np.ndarray] = field(default_factory=dict)     # step -> (p, m * n_bins)

    @property
    def n_bins(self) -> int:
        return len(self.weights)

    @property
    def n_radial(self) -> int:
        return len(self.radial_edges) - 1

    def bin_of(self, marks: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(marks, axis=-1)
        radial = np.clip(np.searchsorted(self.radial_edges, r, side="right") - 1, 0, self.n_radial - 1)
        if self.signed:
            return radial + self.n_radial * (marks[..., 0] < 0)
        return radial

    def bin_bounds(self, b: int):
        """(r_lo, r_hi, sign) of bin b; sign is 0 for unsigned bins."""
        radial = b % self.n_radial
        sign = 0 if not self.signed else (1 if b < self.n_radial else -1)
        return float(self.radial_edges[radial]), float(self.radial_edges[radial + 1]), sign

    def values(self, step: int, X: np.ndarray, m: int) -> np.ndarray:
        """(N, m, n_bins) regressed bin values at states X for step."""
        design = self.bases[step].design(X)
        return (design @ self.coefs[step]).reshape(len(X), m, self.n_bins)


@dataclass(eq=False)
class BsdeSolution:
    """Pathwise (y, z, q) on the grid plus the regressed value fields."""

    grid: TimeGrid
    x0: np.ndarray
    y: np.ndarray                       # (m, N, n+1)
    z: np.ndarray                       # (m, N, n, d)
    q: np.ndarray                       # (m, N, n)
    u_fields: ValueField
    diagnostics: List[StepDiagnostic]
    estimator: QEstimator
    truncation_k: int
    seed: int
    basis: Dict[str, Any]
    y0_standard_error: np.ndarray       # (m,)
    picard_iterations_used: List[int] = field(default_factory=list)
    picard_deltas: List[List[float]] = field(default_factory=list)
    windows: List[List[int]] = field(default_factory=list)
    jump_energy: Optional[np.ndarray] = None        # (m, N, n) ∫|U|² dλ_k
    mark_channel: Optional[MarkBinChannel] = None

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def n_paths(self) -> int:
        return self.y.shape[1]

    @property
    def y0(self) -> np.ndarray:
        return self.y[:, :, 0].mean(axis=1)

    def u_hat(self, t: float, x) -> np.ndarray:
        return self.u_fields(t, np.asarray(x, dtype=float))

    def terminal_gap(self, terminal: np.ndarray) -> float:
        """max |y_T - g(X_T)| for terminal values of shape (N, m)."""
        return float(np.max(np.abs(self.y[:, :, -1] - terminal.T)))

    def summary(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.as_dict(),
            "x0": self.x0.tolist(),
            "n_paths": self.n_paths,
            "estimator": self.estimator.value,
            "basis": self.basis,
            "truncation_k": self.truncation_k,
            "seed": self.seed,
            "y0": self.y0.tolist(),
            "y0_standard_error": self.y0_standard_error.tolist(),
            "max_condition": max((d.condition for d in self.diagnostics), default=0.0),
            "picard_iterations_used": self.picard_iterations_used,
            "picard_deltas": self.picard_deltas,
            "windows": self.windows,
        }
