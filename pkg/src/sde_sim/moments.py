"""Empirical moment estimates for the forward process."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from src.sde_sim.simulator import PathBundle
from src.utils.errors import GridMismatch


@dataclass
class MomentFit:
    """stat(s) ≈ M·scale(s) fitted through the origin."""

    stat: List[float]
    scale: List[float]
    M: float
    residuals: List[float]
    max_residual: float
    monotone: bool

    def to_dict(self) -> Dict:
        return {
            "stat": self.stat,
            "scale": self.scale,
            "M": self.M,
            "residuals": self.residuals,
            "max_residual": self.max_residual,
            "monotone": self.monotone,
        }


@dataclass
class MomentReport:
    p: int
    times: List[float]
    n_paths: int
    seed: int
    start: MomentFit
    coupled: Optional[MomentFit] = None
    x: List[float] = field(default_factory=list)
    x_prime: Optional[List[float]] = None

    def to_dict(self) -> Dict:
        return {
            "p": self.p,
            "times": self.times,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "x": self.x,
            "x_prime": self.x_prime,
            "start": self.start.to_dict(),
            "coupled": self.coupled.to_dict() if self.coupled else None,
        }


def running_sup_norm(paths: np.ndarray, left: np.ndarray) -> np.ndarray:
    """sup_{r ≤ s} |path_r| per node, using both node values and left limits; (N, n+1)."""
    norms = np.maximum(np.linalg.norm(paths, axis=2), np.linalg.norm(left, axis=2))
    return np.maximum.accumulate(norms, axis=1)


def fit_through_origin(stat: np.ndarray, scale: np.ndarray) -> MomentFit:
    """Least-squares M with stat ≈ M·scale, relative residuals on nodes with scale > 0."""
    active = scale > 0
    denom = float(np.sum(scale[active] ** 2))
    M = float(np.sum(stat[active] * scale[active]) / denom) if denom > 0 else 0.0
    fitted = M * scale
    residuals = np.zeros_like(stat)
    ok = active & (fitted > 0)
    residuals[ok] = np.abs(stat[ok] - fitted[ok]) / fitted[ok]
    monotone = bool(np.all(np.diff(stat) >= -1e-12 * max(1.0, float(np.max(np.abs(stat))))))
    return MomentFit(stat.tolist(), scale.tolist(), M, residuals.tolist(),
                     float(residuals.max()) if residuals.size else 0.0, monotone)


def moment_check(bundle: PathBundle, bundle2: Optional[PathBundle] = None, p: int = 2) -> MomentReport:
    """E[sup_{r≤s}|X_r - x|^p] against M_p(s-t)(1+|x|^p); with a second bundle
    started at x' on the same noise, E[sup|X - X' - (x - x')|^p] against M_p(s-t)|x-x'|^p."""
    if p not in (2, 4):
        raise ValueError(f"p must be 2 or 4, got {p}")
    elapsed = bundle.grid.nodes - bundle.grid.t0
    x = bundle.x0

    sup = running_sup_norm(bundle.states - x, bundle.left_limits - x)
    stat = np.mean(sup ** p, axis=0)
    start = fit_through_origin(stat, elapsed * (1.0 + np.linalg.norm(x) ** p))

    coupled = None
    if bundle2 is not None:
        if not bundle.same_noise(bundle2):
            raise GridMismatch("coupled moment check needs bundles on the same grid, seed and truncation",
                               first=bundle.header(), second=bundle2.header())
        shift = x - bundle2.x0
        diff_states = bundle.states - bundle2.states - shift
        diff_left = bundle.left_limits - bundle2.left_limits - shift
        sup2 = running_sup_norm(diff_states, diff_left)
        stat2 = np.mean(sup2 ** p, axis=0)
        coupled = fit_through_origin(stat2, elapsed * np.linalg.norm(shift) ** p)

    return MomentReport(
        p=p,
        times=bundle.grid.nodes.tolist(),
        n_paths=bundle.n_paths,
        seed=bundle.seed,
        start=start,
        coupled=coupled,
        x=x.tolist(),
        x_prime=bundle2.x0.tolist() if bundle2 is not None else None,
    )
