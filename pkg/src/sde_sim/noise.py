"""Forward noise: Brownian increments plus the jumps of a truncated Poisson measure.

Noise is drawn once at a truncation level k and can be thinned to any coarser
level k' ≤ k by dropping marks with |e| < 1/k'. The Brownian path is sampled
on the union of grid nodes and jump times, so thinning keeps it unchanged.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.levy.measure import TruncatedMeasure
from src.levy.sampling import RadialSampler, radial_sampler
from src.sde_sim.grid import TimeGrid
from src.sde_sim.rng import Stream, path_stream
from src.utils.config import settings


@dataclass(frozen=True, eq=False)
class PathNoise:
    grid: TimeGrid
    k: int
    seed: int
    n_paths: int
    dB: np.ndarray          # (N, n_steps, d)
    jump_path: np.ndarray   # (J,) sorted by (path, time)
    jump_step: np.ndarray   # (J,)
    jump_time: np.ndarray   # (J,)
    jump_mark: np.ndarray   # (J, l)
    jump_dw: np.ndarray     # (J, d) W(time) - W(nodes[step])

    @property
    def n_jumps(self) -> int:
        return len(self.jump_time)

    def thin(self, k: int) -> "PathNoise":
        """Noise of the coarser truncation level k."""
        if k > self.k:
            raise ValueError(f"cannot refine noise drawn at level {self.k} to level {k}")
        if k == self.k:
            return self
        keep = np.linalg.norm(self.jump_mark, axis=1) >= 1.0 / k
        return PathNoise(self.grid, k, self.seed, self.n_paths, self.dB,
                         self.jump_path[keep], self.jump_step[keep], self.jump_time[keep],
                         self.jump_mark[keep], self.jump_dw[keep])


def _one_path(path: int, seed: int, grid: TimeGrid, d: int, rate: float,
              sampler: RadialSampler) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    nodes = grid.nodes
    span = grid.T - grid.t0
    jumps_rng = path_stream(seed, path, Stream.JUMPS)
    count = int(jumps_rng.poisson(rate * span)) if rate > 0 else 0
    times = np.sort(grid.t0 + span * jumps_rng.random(count))
    marks = sampler.marks(path_stream(seed, path, Stream.MARKS), count) if count else np.zeros((0, sampler.dim))

    # Brownian path on grid nodes ∪ jump times
    merged = np.concatenate([nodes, times])
    is_jump = np.concatenate([np.zeros(len(nodes), dtype=bool), np.ones(count, dtype=bool)])
    order = np.argsort(merged, kind="stable")
    merged, is_jump = merged[order], is_jump[order]
    gaps = np.diff(merged)
    bm_rng = path_stream(seed, path, Stream.BROWNIAN)
    incr = bm_rng.standard_normal((len(gaps), d)) * np.sqrt(gaps)[:, None]
    w = np.vstack([np.zeros((1, d)), np.cumsum(incr, axis=0)])

    w_nodes = w[~is_jump]
    dB = np.diff(w_nodes, axis=0)
    steps = grid.step_of(times)
    w_jumps = w[is_jump]
    dw = w_jumps - w_nodes[steps]
    return dB, times, marks, dw


def sample_noise(tm: TruncatedMeasure, grid: TimeGrid, n_paths: int, d: int, seed: int,
                 n_jobs: int = None) -> PathNoise:
    """Draw the forward noise for n_paths paths at truncation level tm.k."""
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    n_jobs = settings.n_threads if n_jobs is None else n_jobs
    rate = float(tm.total_mass) if not tm.base.is_zero else 0.0
    sampler = radial_sampler(tm) if rate > 0 else RadialSampler(np.ones(2), np.array([0.0, 1.0]), tm.dim,
                                                                np.zeros(2), np.zeros(2))

    def chunk(paths: range) -> List:
        return [_one_path(p, seed, grid, d, rate, sampler) for p in paths]

    size = settings.path_chunk
    ranges = [range(s, min(s + size, n_paths)) for s in range(0, n_paths, size)]
    if n_jobs == 1 or len(ranges) == 1:
        parts = [chunk(r) for r in ranges]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(chunk)(r) for r in ranges)
    results = [item for part in parts for item in part]

    dB = np.stack([r[0] for r in results])
    counts = np.array([len(r[1]) for r in results])
    jump_path = np.repeat(np.arange(n_paths), counts)
    jump_time = np.concatenate([r[1] for r in results]) if counts.sum() else np.zeros(0)
    jump_mark = np.concatenate([r[2] for r in results]) if counts.sum() else np.zeros((0, tm.dim))
    jump_dw = np.concatenate([r[3] for r in results]) if counts.sum() else np.zeros((0, d))
    return PathNoise(grid, tm.k, seed, n_paths, dB, jump_path, grid.step_of(jump_time), jump_time,
                     jump_mark, jump_dw)
