"""Euler scheme for the truncated jump-diffusion X^{t,x}."""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src.levy.measure import TruncatedMeasure
from src.model.spec import ModelSpec, as_points
from src.operators.tabulation import tabulate
from src.sde_sim.grid import TimeGrid
from src.sde_sim.noise import PathNoise, sample_noise
from src.utils.errors import GridMismatch, NonFiniteState
from src.utils.logger import logger, progress_disabled

_STATE_LIMIT = 1e150


@dataclass(frozen=True, eq=False)
class PathBundle:
    """N forward paths on a grid, with everything the backward solver needs."""

    grid: TimeGrid
    n_paths: int
    x0: np.ndarray
    states: np.ndarray               # (N, n+1, k)
    left_limits: np.ndarray          # (N, n+1, k)
    brownian_increments: np.ndarray  # (N, n, d)
    jump_path: np.ndarray            # (J,)
    jump_step: np.ndarray            # (J,)
    jump_time: np.ndarray            # (J,)
    jump_mark: np.ndarray            # (J, l)
    jump_pre: np.ndarray             # (J, k) state just before the jump
    jump_post: np.ndarray            # (J, k)
    truncation_k: int
    seed: int
    noise_level: int

    @property
    def k(self) -> int:
        return self.states.shape[2]

    def jump_events(self, path: int) -> List[Tuple[float, np.ndarray, np.ndarray]]:
        """(time, mark, pre-jump state) for one path, in time order."""
        sel = np.flatnonzero(self.jump_path == path)
        return [(float(self.jump_time[i]), self.jump_mark[i], self.jump_pre[i]) for i in sel]

    def same_noise(self, other: "PathBundle") -> bool:
        return (self.grid == other.grid and self.n_paths == other.n_paths and self.seed == other.seed
                and self.truncation_k == other.truncation_k)

    def header(self) -> dict:
        return {
            "grid": self.grid.as_dict(),
            "n_paths": self.n_paths,
            "x0": self.x0.tolist(),
            "truncation_k": self.truncation_k,
            "seed": self.seed,
            "noise_level": self.noise_level,
        }


def compensator_drift(spec: ModelSpec, tm: TruncatedMeasure, t: float, X: np.ndarray) -> np.ndarray:
    """∫_{|e|≥1/k} β(t, X, e) λ(de) for states X of shape (N, k)."""
    if tm.total_mass == 0.0:
        return np.zeros_like(X)

    def at(points: np.ndarray) -> np.ndarray:
        def phi(e):
            vals = spec.beta(t, points[:, None, :], e[None, :, :])     # (n, q, k)
            return np.moveaxis(vals, -1, -2)                           # (n, k, q)
        return np.asarray(tm.integrate(phi))

    if spec.beta_state_independent:
        return np.broadcast_to(at(X[:1])[0], X.shape).copy()
    return tabulate(at, X)


def _advance(spec: ModelSpec, X: np.ndarray, s: np.ndarray, ds: np.ndarray, dw: np.ndarray,
             comp: np.ndarray) -> np.ndarray:
    drift = spec.b(s, X) - comp
    vol = spec.sigma(s, X)                                             # (n, k, d)
    return X + drift * ds[:, None] + np.einsum("nkd,nd->nk", vol, dw)


def _check_finite(X: np.ndarray, step: int, paths: np.ndarray = None):
    bad = ~np.all(np.isfinite(X) & (np.abs(X) < _STATE_LIMIT), axis=1)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        path = int(paths[first]) if paths is not None else first
        raise NonFiniteState(f"state left the representable range at step {step}, path {path}",
                             step=step, path=path)


def simulate(spec: ModelSpec, tm: TruncatedMeasure, t: float, x, grid: TimeGrid, n_paths: int,
             seed: int, noise: Optional[PathNoise] = None) -> PathBundle:
    """Euler scheme between consecutive events (grid nodes and jump times).

    Between events X moves by b·Δ + σ·ΔB minus the compensator drift of λ_k,
    then each jump adds β(τ, X_{τ-}, e). The compensator rate is evaluated at
    the start of each step. Jumps landing exactly on a node are applied after
    that node's left limit is recorded.
    """
    if abs(grid.t0 - t) > 1e-14:
        raise GridMismatch(f"grid starts at {grid.t0}, simulation starts at {t}", t=t, t0=grid.t0)
    x = as_points(x, spec.dims.k)
    if noise is None:
        noise = sample_noise(tm, grid, n_paths, spec.dims.d, seed)
    else:
        if noise.grid != grid or noise.n_paths != n_paths or noise.seed != seed:
            raise GridMismatch("supplied noise was drawn for another grid, path count or seed")
        noise = noise.thin(tm.k)

    k_dim, n = spec.dims.k, grid.n_steps
    nodes = grid.nodes
    X = np.tile(x, (n_paths, 1))
    states = np.empty((n_paths, n + 1, k_dim))
    left = np.empty((n_paths, n + 1, k_dim))
    jump_pre = np.empty((noise.n_jumps, k_dim))
    jump_post = np.empty((noise.n_jumps, k_dim))

    # rank of each jump within its (path, step); noise jumps are sorted by (path, time)
    J = noise.n_jumps
    rank = np.zeros(J, dtype=int)
    if J:
        key = noise.jump_path.astype(np.int64) * (n + 1) + noise.jump_step
        starts = np.r_[0, np.flatnonzero(np.diff(key)) + 1]
        run = np.repeat(starts, np.diff(np.r_[starts, J]))
        rank = np.arange(J) - run
    step_sorted = np.argsort(noise.jump_step, kind="stable")
    step_bounds = np.searchsorted(noise.jump_step[step_sorted], np.arange(n + 1))

    logger.debug(f"simulating {n_paths} paths, {n} steps, k={tm.k}, {J} jumps, seed={seed}")
    for j in tqdm(range(n), desc="forward", disable=progress_disabled() or n_paths * n < 10 ** 6):
        t_j, t_next = nodes[j], nodes[j + 1]
        left[:, j] = X
        comp = compensator_drift(spec, tm, t_j, X)

        in_step = step_sorted[step_bounds[j]:step_bounds[j + 1]]
        s_prev = np.full(n_paths, t_j)
        w_prev = np.zeros((n_paths, spec.dims.d))
        on_node = noise.jump_time[in_step] <= t_j
        for phase, group in enumerate((in_step[on_node], in_step[~on_node])):
            if phase == 1:
                states[:, j] = X
            for r in np.unique(rank[group]):
                sel = group[rank[group] == r]
                p = noise.jump_path[sel]
                tau = noise.jump_time[sel]
                Xp = _advance(spec, X[p], s_prev[p], tau - s_prev[p], noise.jump_dw[sel] - w_prev[p], comp[p])
                jump_pre[sel] = Xp
                Xp = Xp + spec.beta(tau, Xp, noise.jump_mark[sel])
                jump_post[sel] = Xp
                _check_finite(Xp, j, p)
                X[p] = Xp
                s_prev[p] = tau
                w_prev[p] = noise.jump_dw[sel]

        X = _advance(spec, X, s_prev, t_next - s_prev, noise.dB[:, j] - w_prev, comp)
        _check_finite(X, j + 1)

    states[:, n] = X
    left[:, n] = X
    return PathBundle(
        grid=grid,
        n_paths=n_paths,
        x0=x,
        states=states,
        left_limits=left,
        brownian_increments=noise.dB,
        jump_path=noise.jump_path,
        jump_step=noise.jump_step,
        jump_time=noise.jump_time,
        jump_mark=noise.jump_mark,
        jump_pre=jump_pre,
        jump_post=jump_post,
        truncation_k=tm.k,
        seed=seed,
        noise_level=noise.k,
    )
