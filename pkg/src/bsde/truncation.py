"""Convergence of the truncated problems as the jump threshold 1/k shrinks."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr
from tqdm import tqdm

from src.bsde.basis import RegressionBasis
from src.bsde.solution import BsdeSolution, QEstimator
from src.bsde.solver import solve_lsmc
from src.levy.measure import truncate
from src.model.spec import ModelSpec, as_points
from src.sde_sim.grid import TimeGrid
from src.sde_sim.noise import sample_noise
from src.sde_sim.simulator import simulate
from src.utils.logger import logger, progress_disabled


@dataclass
class ConvergenceTable:
    """One row per truncation level; the last level is the reference."""

    rows: List[Dict[str, Any]]
    fitted_C: float
    spearman: float
    seed: int
    n_paths: int
    solutions: Dict[int, BsdeSolution] = field(default_factory=dict, repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def nonincreasing(self, name: str, slack: float = 0.1, floor: float = 1e-12) -> bool:
        """Each error is at most (1 + slack) times the previous one, up to an absolute floor."""
        vals = self.column(name)
        return bool(np.all(vals[1:] <= vals[:-1] * (1.0 + slack) + floor))

    def to_dict(self) -> Dict[str, Any]:
        return {"rows": self.rows, "fitted_C": self.fitted_C, "spearman": self.spearman,
                "seed": self.seed, "n_paths": self.n_paths}


def _sup_sq(diff: np.ndarray) -> np.ndarray:
    """Per-path sup over nodes of the squared norm; diff is (N, nodes, dim)."""
    return (diff ** 2).sum(axis=-1).max(axis=1)


def truncation_study(spec: ModelSpec, t: float, x, grid: TimeGrid, ks: Sequence[int], n_paths: int, seed: int,
                     basis: Optional[RegressionBasis] = None,
                     u_estimator: QEstimator = QEstimator.REPRESENTATION) -> ConvergenceTable:
    """Solve at every k on common random numbers and compare with the largest k."""
    ks = [int(k) for k in ks]
    if ks != sorted(set(ks)):
        raise ValueError(f"truncation levels must be strictly increasing, got {ks}")
    basis = basis or RegressionBasis()
    x = as_points(x, spec.dims.k)
    k_max = ks[-1]
    measure = spec.measure
    noise = None
    if not measure.is_zero:
        noise = sample_noise(truncate(measure, k_max), grid, n_paths, spec.dims.d, seed)

    bundles, solutions = {}, {}
    for k in tqdm(ks, desc="truncation levels", disable=progress_disabled()):
        tm = truncate(measure, k)
        bundles[k] = simulate(spec, tm, t, x, grid, n_paths, seed, noise=noise)
        solutions[k] = solve_lsmc(spec, bundles[k], basis, u_estimator)

    ref_b, ref_s = bundles[k_max], solutions[k_max]
    dt = grid.dt
    rows = []
    for k in ks:
        b, s = bundles[k], solutions[k]
        dx = np.concatenate([b.states - ref_b.states, b.left_limits - ref_b.left_limits], axis=1)
        dy = (s.y - ref_s.y).transpose(1, 2, 0)
        e_z = dt * ((s.z - ref_s.z) ** 2).sum(axis=(0, 2, 3))
        e_u = dt * ((s.q - ref_s.q) ** 2).sum(axis=(0, 2))
        rows.append({
            "k": k,
            "tail_mass": 0.0 if measure.is_zero else measure.tail_mass(k),
            "e_X": float(_sup_sq(dx).mean()),
            "e_Y": float(_sup_sq(dy).mean()),
            "e_Z": float(e_z.mean()),
            "e_U": float(e_u.mean()),
            "y0": s.y0.tolist(),
        })
        logger.debug(f"k={k}: e_X={rows[-1]['e_X']:.3e} e_Y={rows[-1]['e_Y']:.3e} m(k)={rows[-1]['tail_mass']:.3e}")

    e_x = np.array([r["e_X"] for r in rows])
    tails = np.array([r["tail_mass"] for r in rows])
    ratios = [ex / m for ex, m in zip(e_x[:-1], tails[:-1]) if m > 0]
    fitted_C = float(max(ratios)) if ratios else 0.0
    spearman = float("nan")
    if len(rows) >= 3 and np.ptp(e_x) > 0 and np.ptp(tails) > 0:
        spearman = float(spearmanr(e_x, tails).correlation)
    for r in rows:
        r["bound"] = fitted_C * r["tail_mass"]
    logger.info(f"truncation study over k={ks}: fitted C={fitted_C:.4g}, Spearman={spearman:.3f}")
    return ConvergenceTable(rows, fitted_C, spearman, seed, n_paths, solutions)
