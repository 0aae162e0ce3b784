"""IMEX finite differences: implicit local part, explicit nonlocal part and generator."""
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, solve_banded
from tqdm import tqdm

from src.fd_oracle.problem import FdProblem
from src.model.assumptions import AssumptionReport
from src.operators.nonlocal_ops import NonlocalOperator
from src.operators.value_field import ValueField
from src.utils.errors import TridiagonalSingular
from src.utils.logger import logger, progress_disabled


def _local_bands(problem: FdProblem, t: float) -> np.ndarray:
    """Banded form (2 sub-, 2 super-diagonals) of I - Δt·(b D + ½σ² D²).

    The end rows carry u_0 - 2u_1 + u_2 = 0 and its mirror, so the solution is
    affine near the box ends.
    """
    spec, x, h, dt = problem.spec, problem.x, problem.dx, problem.dt
    nx = problem.nx
    X = x[:, None]
    b = spec.b(t, X)[:, 0]
    a = 0.5 * spec.sigma(t, X)[:, 0, 0] ** 2
    lower = -dt * (a / h ** 2 - b / (2 * h))
    diag = 1.0 + dt * 2 * a / h ** 2
    upper = -dt * (a / h ** 2 + b / (2 * h))

    ab = np.zeros((5, nx))
    # ab[2 + i - j, j] = A[i, j]
    rows = np.arange(1, nx - 1)
    ab[2, rows] = diag[rows]
    ab[1, rows + 1] = upper[rows]
    ab[3, rows - 1] = lower[rows]
    ab[2, 0], ab[1, 1], ab[0, 2] = 1.0, -2.0, 1.0
    ab[2, nx - 1], ab[3, nx - 2], ab[4, nx - 3] = 1.0, -2.0, 1.0
    return ab


def explicit_terms(problem: FdProblem, u: np.ndarray, t: float) -> np.ndarray:
    """K u^i + h^(i)(t, x, u, σ D u, B_i u) at every node; u is (m, nx)."""
    spec, x = problem.spec, problem.x
    X = x[:, None]
    field = ValueField.from_values([t], [x], u[:, None, :])
    op = NonlocalOperator(spec, field, check=False)
    m = u.shape[0]
    grad = np.gradient(u, problem.dx, axis=1)                          # (m, nx)
    sigma = spec.sigma(t, X)[:, 0, 0]
    z = (sigma[None, :] * grad).T[:, :, None]                           # (nx, m, 1)
    q = np.column_stack([op.coupling(i, t, X) for i in range(m)])       # (nx, m)
    K = np.column_stack([op.K(i, t, X) for i in range(m)])
    return (K + spec.generator(t, X, u.T, z, q)).T


def solve_fd(problem: FdProblem, report: Optional[AssumptionReport] = None) -> ValueField:
    """March u(T, ·) = g backward to t0 and return every time level as one field."""
    spec = problem.spec
    cfl = problem.check_cfl(report)
    times = problem.times
    u = spec.terminal(problem.x[:, None]).T                              # (m, nx)
    levels = [u]
    logger.info(f"FD oracle: {spec.name}, nx={problem.nx}, nt={problem.nt}, L={problem.L}, cfl={cfl:.3f}")
    for j in tqdm(range(problem.nt - 1, -1, -1), desc="fd", disable=progress_disabled()):
        t_next, t = times[j + 1], times[j]
        rhs = u + problem.dt * explicit_terms(problem, u, t_next)
        rhs[:, 0] = 0.0
        rhs[:, -1] = 0.0
        ab = _local_bands(problem, t)
        try:
            u = solve_banded((2, 2), ab, rhs.T).T
        except (LinAlgError, ValueError) as exc:
            raise TridiagonalSingular(f"local system singular at time {t:.6g}: {exc}", step=j) from exc
        if not np.all(np.isfinite(u)):
            raise TridiagonalSingular(f"local solve produced non-finite values at time {t:.6g}", step=j)
        levels.append(u)
    values = np.stack(levels[::-1], axis=1)                              # (m, nt+1, nx)
    return ValueField.from_values(times, [problem.x], values)
