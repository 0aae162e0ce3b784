"""Picard iteration on short time windows.

Within a window the map Φ freezes (z, q) in the generator, solves backward,
and returns the freshly estimated (z, q). For windows no longer than
(4Ĉ²)⁻¹ the map contracts in the empirical ‖·‖_{δ,2} norm. Windows are
processed from the terminal one backward, each taking its terminal values
from the window after it.
"""
from typing import List, Optional, Union

import numpy as np

from src.bsde.basis import RegressionBasis
from src.bsde.solution import BsdeSolution, QEstimator
from src.bsde.solver import BackwardSolver
from src.model.assumptions import AssumptionReport, check_assumptions
from src.model.spec import ModelSpec
from src.sde_sim.simulator import PathBundle
from src.utils.config import settings
from src.utils.errors import ContractionStall
from src.utils.logger import logger

# deltas shrinking by less than this factor count as a plateau
_PLATEAU_RATIO = 0.99


def window_length(spec: ModelSpec, T_minus_t: float, report: Optional[AssumptionReport] = None) -> float:
    """δ = (4Ĉ²)⁻¹ with Ĉ the sampled h-Lipschitz constant, capped at T - t."""
    report = report or check_assumptions(spec)
    c_hat = report.h_lipschitz
    if c_hat <= 0:
        return T_minus_t
    return min(T_minus_t, 1.0 / (4.0 * c_hat ** 2))


def window_bounds(n_steps: int, dt: float, delta: float) -> List[List[int]]:
    """Node ranges [a, b] covering the grid, listed from the last window to the first."""
    per = max(1, int(np.floor(delta / dt + 1e-9)))
    bounds = []
    b = n_steps
    while b > 0:
        a = max(0, b - per)
        bounds.append([a, b])
        b = a
    return bounds


def window_norm(dz: np.ndarray, dq: np.ndarray, dt: float) -> float:
    """sqrt(E Σ_j Δt (|Δz_j|² + |Δq_j|²)) summed over components."""
    per_path = dt * ((dz ** 2).sum(axis=(0, 2, 3)) + (dq ** 2).sum(axis=(0, 2)))
    return float(np.sqrt(per_path.mean()))


def picard_subinterval(spec: ModelSpec, bundle: PathBundle, basis: Optional[RegressionBasis] = None,
                       delta: Union[float, str] = "auto",
                       u_estimator: QEstimator = QEstimator.REPRESENTATION,
                       report: Optional[AssumptionReport] = None,
                       tol: Optional[float] = None, max_iter: Optional[int] = None) -> BsdeSolution:
    """Solve by contraction windows of length ≤ delta ("auto" uses (4Ĉ²)⁻¹)."""
    basis = basis or RegressionBasis()
    tol = settings.picard_tol if tol is None else tol
    max_iter = settings.picard_max_iter if max_iter is None else max_iter
    grid = bundle.grid
    horizon = grid.T - grid.t0
    if delta == "auto":
        report = report or check_assumptions(spec)
        delta = window_length(spec, horizon, report)
    delta = float(delta)
    if delta <= 0:
        raise ValueError(f"window length must be positive, got {delta}")

    solver = BackwardSolver(spec, bundle, basis, u_estimator, report=report)
    windows = window_bounds(grid.n_steps, grid.dt, delta)
    logger.info(f"Picard solve: {spec.name}, δ={delta:.4g}, {len(windows)} window(s), tol={tol:g}")

    iterations: List[int] = []
    all_deltas: List[List[float]] = []
    for w, (a, b) in enumerate(windows):
        zeros_z = np.zeros((solver.m, solver.N, b - a, solver.d))
        zeros_q = np.zeros((solver.m, solver.N, b - a))
        solver.sweep(a, b, zeros_z, zeros_q, desc=f"window {w} seed")
        z_prev, q_prev = solver.z[:, :, a:b].copy(), solver.q[:, :, a:b].copy()
        deltas: List[float] = []
        for it in range(1, max_iter + 1):
            solver.sweep(a, b, z_prev, q_prev, desc=f"window {w} iter {it}")
            z_new, q_new = solver.z[:, :, a:b].copy(), solver.q[:, :, a:b].copy()
            deltas.append(window_norm(z_new - z_prev, q_new - q_prev, grid.dt))
            z_prev, q_prev = z_new, q_new
            logger.debug(f"window {w} [{a},{b}] iteration {it}: delta={deltas[-1]:.3e}")
            if deltas[-1] < tol:
                break
            if it >= 3 and deltas[-1] >= _PLATEAU_RATIO * deltas[-2]:
                raise ContractionStall(f"window {w} stopped contracting at delta {deltas[-1]:.3e}",
                                       window=w, deltas=deltas[-2:])
        else:
            raise ContractionStall(f"window {w} did not reach {tol:g} in {max_iter} iterations",
                                   window=w, deltas=deltas[-2:])
        iterations.append(len(deltas))
        all_deltas.append(deltas)

    return solver.result(iterations, all_deltas, windows)
