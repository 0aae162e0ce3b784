"""Least-squares Monte Carlo for the coupled BSDE with jumps."""
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src.bsde.basis import ConstantBasis, RegressionBasis, regress
from src.bsde.solution import BsdeSolution, MarkBinChannel, QEstimator, StepDiagnostic
from src.levy import quadrature
from src.levy.measure import truncate
from src.levy.sampling import radial_sampler
from src.model.assumptions import AssumptionReport, max_stable_dt
from src.model.spec import CouplingMode, ModelSpec
from src.operators.nonlocal_ops import NonlocalOperator
from src.operators.tabulation import tabulate
from src.operators.value_field import ValueField, lattice_points
from src.sde_sim.simulator import PathBundle
from src.utils.config import settings
from src.utils.errors import NonConvergence
from src.utils.logger import logger, progress_disabled

# lattice margin on each side, as a fraction of the state range
_FIELD_MARGIN = 0.1
_FIELD_QUANTILE = 1e-3


def field_axes(bundle: PathBundle, n_nodes: Optional[int] = None) -> List[np.ndarray]:
    """Lattice axes covering the simulated states, shared by every node of a solve."""
    k = bundle.k
    n_nodes = n_nodes or max(9, int(settings.field_nodes ** (2.0 / (k + 1))))
    states = bundle.states.reshape(-1, k)
    axes = []
    for a in range(k):
        lo, hi = np.quantile(states[:, a], [_FIELD_QUANTILE, 1 - _FIELD_QUANTILE])
        lo, hi = min(lo, bundle.x0[a]), max(hi, bundle.x0[a])
        width = hi - lo
        if width < 1e-9:
            lo, hi, width = lo - 0.5, hi + 0.5, 1.0
        axes.append(np.linspace(lo - _FIELD_MARGIN * width, hi + _FIELD_MARGIN * width, n_nodes))
    return axes


class BackwardSolver:
    """Backward recursion over the grid, one time step at a time.

    All m components share the regression design of each step. Sweeps may
    cover any step range [j_lo, j_hi) once node j_hi is known, which is what
    Picard windows need; solve_lsmc runs one sweep over the whole grid.
    """

    def __init__(self, spec: ModelSpec, bundle: PathBundle, basis: RegressionBasis,
                 estimator: QEstimator = QEstimator.REPRESENTATION, u_prev=None,
                 report: Optional[AssumptionReport] = None):
        self.logger = logger
        self.spec = spec
        self.bundle = bundle
        self.basis = basis
        self.estimator = QEstimator(estimator)
        self.u_prev = u_prev
        if self.estimator is QEstimator.FROZEN and u_prev is None:
            raise ValueError("the frozen estimator needs a field u_prev")
        basis.check_admissible(bundle.k, bundle.n_paths)

        self.grid = bundle.grid
        self.dt = self.grid.dt
        self.m, self.d = spec.dims.m, spec.dims.d
        self.N, self.n = bundle.n_paths, self.grid.n_steps
        self.tm = None if spec.measure.is_zero else truncate(spec.measure, bundle.truncation_k)
        self.r_min = 1.0 / bundle.truncation_k

        self.axes = field_axes(bundle)
        self.shape = tuple(len(a) for a in self.axes)
        self.lattice = lattice_points(self.axes)

        self.y = np.empty((self.m, self.N, self.n + 1))
        self.z = np.zeros((self.m, self.N, self.n, self.d))
        self.q = np.zeros((self.m, self.N, self.n))
        self.drift = np.zeros((self.m, self.N, self.n))                  # Δt·h per step
        self.energy = np.zeros((self.m, self.N, self.n)) if self.estimator is QEstimator.REPRESENTATION else None
        self.node_values = np.empty((self.m, self.n + 1, len(self.lattice)))
        self.diagnostics: Dict[int, StepDiagnostic] = {}
        self.last_continuation: Optional[ValueField] = None
        self.channel = self._mark_channel() if self.estimator is QEstimator.MARTINGALE else None

        X_T = bundle.states[:, -1]
        self.y[:, :, -1] = spec.terminal(X_T).T
        self.node_values[:, -1] = spec.terminal(self.lattice).T

        self._check_step_size(report)

    def _check_step_size(self, report: Optional[AssumptionReport]):
        limit = max_stable_dt(self.spec, report, n=400)
        if self.dt >= limit:
            self.logger.warning(f"Δt={self.dt:.4g} ≥ 1/C_y={limit:.4g}: the implicit y-step may not contract")

    def _mark_channel(self) -> Optional[MarkBinChannel]:
        if self.tm is None:
            return None
        signed = self.spec.dims.l == 1
        n_radial = max(1, settings.martingale_bins // 2 if signed else settings.martingale_bins)
        sampler = radial_sampler(self.tm)
        edges = sampler.radius(np.linspace(0.0, 1.0, n_radial + 1))
        edges[0], edges[-1] = self.tm.threshold, self.spec.measure.support_radius
        channel = MarkBinChannel(edges, signed, np.zeros(0))
        weights = []
        for b in range(n_radial * (2 if signed else 1)):
            r_lo, r_hi, sign = channel.bin_bounds(b)
            if sign == 0:
                phi = lambda e: np.ones(len(e))
            else:
                phi = lambda e, s=sign: (s * e[:, 0] > 0).astype(float)
            weights.append(float(quadrature.integrate(self.spec.measure, phi, 0, r_lo, r_hi)))
        channel.weights = np.array(weights)
        return channel

    # step pieces

    def _continuation(self, fitted, coef_y: np.ndarray, t: float) -> ValueField:
        if isinstance(fitted, ConstantBasis) and self.last_continuation is not None:
            return self.last_continuation
        values = (fitted.design(self.lattice) @ coef_y).T                # (m, G)
        return ValueField.from_values([t], self.axes, values.reshape((self.m, 1) + self.shape))

    def _representation(self, field, t: float, X: np.ndarray, energy: bool) -> Tuple[np.ndarray, np.ndarray]:
        """Coupling scalars (N, m) and, when asked, jump energies (N, m) of the field."""
        op = NonlocalOperator(self.spec, field, r_min=self.r_min, check=False)
        norm_mode = self.spec.coupling_mode is CouplingMode.NORM_COUPLING

        def at(P: np.ndarray) -> np.ndarray:
            cols = []
            for i in range(self.m):
                en = op.jump_energy(i, t, P) if (energy or norm_mode) else None
                cols.append(np.sqrt(en) if norm_mode else op.B(i, t, P))
                cols.append(en if en is not None else np.zeros(len(P)))
            return np.column_stack(cols)

        table = tabulate(at, X)
        return table[:, 0::2], table[:, 1::2]

    def _martingale_targets(self, j: int, t: float, X: np.ndarray, resid: np.ndarray) -> np.ndarray:
        """Columns: m gamma-functional targets, then m × n_bins mark-bin targets."""
        b = self.bundle
        sel = np.flatnonzero(b.jump_step == j)
        paths, marks = b.jump_path[sel], b.jump_mark[sel]
        cols = []
        for i, gamma_i in enumerate(self.spec.gamma):
            def comp(P, gamma_i=gamma_i):
                return np.asarray(self.tm.integrate(lambda e: gamma_i(t, P[:, None, :], e[None, :, :])))
            G = -self.dt * tabulate(comp, X)
            np.add.at(G, paths, gamma_i(t, X[paths], marks))
            cols.append(resid[:, i] * G / self.dt)
        ch = self.channel
        counts = np.zeros((self.N, ch.n_bins))
        np.add.at(counts, (paths, ch.bin_of(marks)), 1.0)
        safe = np.where(ch.weights > 0, ch.weights, 1.0)
        comp_counts = np.where(ch.weights > 0, (counts - self.dt * ch.weights) / (self.dt * safe), 0.0)
        for i in range(self.m):
            cols.append(resid[:, i, None] * comp_counts)
        return np.column_stack(cols)

    def _implicit_y(self, j: int, t: float, X: np.ndarray, E: np.ndarray, z: np.ndarray,
                    q: np.ndarray) -> Tuple[np.ndarray, int]:
        y = E.copy()
        for passes in range(1, settings.implicit_max_passes + 1):
            y_new = E + self.dt * self.spec.generator(t, X, y, z, q)
            change = float(np.max(np.abs(y_new - y))) if y.size else 0.0
            y = y_new
            if change <= settings.implicit_tol * (1.0 + float(np.max(np.abs(y)))):
                return y, passes
        raise NonConvergence(f"implicit y-step at step {j} did not settle in {settings.implicit_max_passes} passes",
                             step=j, last_change=change)

    def step(self, j: int, frozen: Optional[Tuple[np.ndarray, np.ndarray]] = None):
        """Fill node j from node j + 1; frozen = (z (N, m, d), q (N, m)) feeds the generator."""
        t = float(self.grid.nodes[j])
        X = self.bundle.states[:, j]
        dB = self.bundle.brownian_increments[:, j]
        y_next = self.y[:, :, j + 1].T                                     # (N, m)

        fitted = self.basis.fit(X)
        D = fitted.design(X)
        centered = y_next - y_next.mean(axis=0)
        z_target = (centered[:, :, None] * dB[:, None, :] / self.dt).reshape(self.N, -1)
        fit = regress(D, np.column_stack([y_next, z_target]), step=j)
        E = fit.fitted[:, :self.m]
        z = fit.fitted[:, self.m:].reshape(self.N, self.m, self.d)
        cont = self._continuation(fitted, fit.coef[:, :self.m], t)

        if self.estimator is QEstimator.REPRESENTATION:
            q, energy = self._representation(cont, t, X, energy=True)
            self.energy[:, :, j] = energy.T
        elif self.estimator is QEstimator.FROZEN:
            q, _ = self._representation(self.u_prev, t, X, energy=False)
        else:
            q = self._martingale_step(j, t, X, D, fitted, y_next - E)

        zz, qq = frozen if frozen is not None else (z, q)
        y, passes = self._implicit_y(j, t, X, E, zz, qq)

        if isinstance(fitted, ConstantBasis):
            shift = y.mean(axis=0) - cont(t, self.bundle.x0[None, :])[0]
            node = cont(t, self.lattice).T + shift[:, None]
            field_resid = np.zeros(self.m)
        else:
            coef = regress(D, y, step=j).coef
            node = (fitted.design(self.lattice) @ coef).T
            field_resid = np.sqrt(np.mean((y - D @ coef) ** 2, axis=0))

        self.y[:, :, j] = y.T
        self.z[:, :, j] = z.transpose(1, 0, 2)
        self.q[:, :, j] = q.T
        self.drift[:, :, j] = (y - E).T
        self.node_values[:, j] = node
        self.last_continuation = cont
        self.diagnostics[j] = StepDiagnostic(
            step=j,
            condition=fit.condition,
            residual=np.sqrt(np.mean((y_next - E) ** 2, axis=0)).tolist(),
            field_residual=np.asarray(field_resid).tolist(),
            implicit_passes=passes,
        )

    def _martingale_step(self, j, t, X, D, fitted, resid) -> np.ndarray:
        if self.tm is None:
            return np.zeros((self.N, self.m))
        targets = self._martingale_targets(j, t, X, resid)
        fit = regress(D, targets, step=j)
        ch = self.channel
        ch.bases[j] = fitted
        ch.coefs[j] = fit.coef[:, self.m:]
        if self.spec.coupling_mode is CouplingMode.NORM_COUPLING:
            bins = fit.fitted[:, self.m:].reshape(self.N, self.m, ch.n_bins)
            return np.sqrt(np.einsum("nmb,b->nm", bins ** 2, ch.weights))
        return fit.fitted[:, :self.m]

    def sweep(self, j_lo: int, j_hi: int, frozen_z: Optional[np.ndarray] = None,
              frozen_q: Optional[np.ndarray] = None, desc: str = "backward"):
        """Steps j_hi - 1 down to j_lo; frozen arrays are indexed relative to j_lo."""
        steps = range(j_hi - 1, j_lo - 1, -1)
        for j in tqdm(steps, desc=desc, disable=progress_disabled() or len(steps) < 20):
            frozen = None
            if frozen_z is not None:
                frozen = (frozen_z[:, :, j - j_lo].transpose(1, 0, 2), frozen_q[:, :, j - j_lo].T)
            self.step(j, frozen)

    def result(self, picard_iterations: List[int] = None, picard_deltas: List[List[float]] = None,
               windows: List[List[int]] = None) -> BsdeSolution:
        values = self.node_values.reshape((self.m, self.n + 1) + self.shape)
        u_fields = ValueField.from_values(self.grid.nodes, self.axes, values)
        # per-path y0: terminal value plus the accumulated generator terms
        pathwise = self.y[:, :, -1] + self.drift.sum(axis=2)
        return BsdeSolution(
            grid=self.grid,
            x0=self.bundle.x0,
            y=self.y,
            z=self.z,
            q=self.q,
            u_fields=u_fields,
            diagnostics=[self.diagnostics[j] for j in sorted(self.diagnostics)],
            estimator=self.estimator,
            truncation_k=self.bundle.truncation_k,
            seed=self.bundle.seed,
            basis=self.basis.as_dict(),
            y0_standard_error=pathwise.std(axis=1, ddof=1) / np.sqrt(self.N),
            picard_iterations_used=picard_iterations or [],
            picard_deltas=picard_deltas or [],
            windows=windows or [[0, self.n]],
            jump_energy=self.energy,
            mark_channel=self.channel,
        )


def solve_lsmc(spec: ModelSpec, bundle: PathBundle, basis: Optional[RegressionBasis] = None,
               u_estimator: QEstimator = QEstimator.REPRESENTATION,
               report: Optional[AssumptionReport] = None) -> BsdeSolution:
    """Backward least-squares Monte Carlo over the bundle's grid.

    Per step the continuation value and Z come from one regression on the
    states at that node. The coupling scalar q comes from the regressed
    continuation field (representation estimator) or from regressing the
    compensated jump functionals (martingale estimator). y_j then solves
    y_j = E_j + Δt·h(t_j, X_j, y_j, z_j, q_j) by fixed-point passes.
    """
    basis = basis or RegressionBasis()
    estimator = QEstimator(u_estimator)
    if estimator is QEstimator.FROZEN:
        raise ValueError("use solve_frozen_nonlocal for an exogenous coupling channel")
    logger.info(f"LSMC solve: {spec.name}, N={bundle.n_paths}, n={bundle.grid.n_steps}, "
                f"k={bundle.truncation_k}, estimator={estimator.value}")
    solver = BackwardSolver(spec, bundle, basis, estimator, report=report)
    solver.sweep(0, solver.n)
    solution = solver.result()
    logger.info(f"y0={np.round(solution.y0, 6).tolist()} ± {np.round(solution.y0_standard_error, 6).tolist()}")
    return solution


def solve_frozen_nonlocal(spec: ModelSpec, bundle: PathBundle, basis: Optional[RegressionBasis] = None,
                          u_prev=None, report: Optional[AssumptionReport] = None) -> BsdeSolution:
    """The BSDE whose coupling scalar is computed from u_prev instead of the solution being built."""
    basis = basis or RegressionBasis()
    logger.debug(f"frozen-nonlocal solve: {spec.name}, N={bundle.n_paths}")
    solver = BackwardSolver(spec, bundle, basis, QEstimator.FROZEN, u_prev=u_prev, report=report)
    solver.sweep(0, solver.n)
    return solver.result()
