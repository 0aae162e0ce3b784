"""Evaluate an expensive state function on a lattice and interpolate to many points."""
from typing import Callable, List

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from src.utils.config import settings

MAX_LATTICE_DIM = 2


def lattice_axes(points: np.ndarray, n_nodes: int) -> List[np.ndarray]:
    """One axis per state coordinate spanning the points' range."""
    axes = []
    for c in range(points.shape[1]):
        lo, hi = float(points[:, c].min()), float(points[:, c].max())
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        axes.append(np.linspace(lo, hi, n_nodes))
    return axes


def evaluate_chunked(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray,
                     chunk: int = None) -> np.ndarray:
    """fn over points (n, k) in chunks; fn returns (n, ...)."""
    chunk = chunk or settings.path_chunk
    parts = [np.asarray(fn(points[s:s + chunk])) for s in range(0, len(points), chunk)]
    return np.concatenate(parts, axis=0)


def tabulate(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, n_nodes: int = None) -> np.ndarray:
    """fn(points) through a lattice when the state dimension is small.

    Args:
        fn: maps states (n, k) to values (n,) or (n, r)
        points: (n, k)

    Returns:
        values at points with fn's trailing shape
    """
    n_nodes = n_nodes or settings.state_lattice_nodes
    n, k = points.shape
    if k > MAX_LATTICE_DIM or n <= n_nodes ** k:
        return evaluate_chunked(fn, points)

    axes = lattice_axes(points, n_nodes)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    table = evaluate_chunked(fn, mesh)
    trailing = table.shape[1:]
    if k == 1:
        flat = table.reshape(n_nodes, -1)
        out = np.stack([np.interp(points[:, 0], axes[0], flat[:, c]) for c in range(flat.shape[1])], axis=-1)
        return out.reshape((n,) + trailing)
    grid_values = table.reshape(tuple(len(a) for a in axes) + trailing)
    interp = RegularGridInterpolator(axes, grid_values, method="linear")
    return interp(points)
