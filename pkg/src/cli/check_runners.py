"""Named checks a config can request, each bound to the state of a running experiment."""
import inspect
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.bsde.solution import BsdeSolution, QEstimator
from src.bsde.solver import solve_lsmc
from src.levy.measure import LevyMeasure
from src.model.spec import ModelSpec
from src.model.zoo import norm_coupling_demo
from src.operators.value_field import ValueField
from src.sde_sim.simulator import PathBundle
from src.utils.errors import ConfigError, UnknownName
from src.verify import (
    CheckReport,
    SolveSettings,
    estimator_agreement_check,
    feynman_kac_probe,
    jump_representation_check,
    jump_representation_refinement,
    moment_estimate_check,
    norm_coupling_consistency_check,
    oracle_agreement_check,
    picard_contraction_check,
    truncation_convergence_check,
    u_class_check,
    uniqueness_fixed_point,
    uniqueness_from_starts,
    up_moment_check,
)


@dataclass
class RunContext:
    """What the earlier stages produced."""

    spec: ModelSpec
    measure: LevyMeasure
    st: SolveSettings
    t: float
    x: np.ndarray
    x_ladder: Optional[List[float]] = None
    ks: Optional[List[int]] = None
    bundle: Optional[PathBundle] = None
    solution: Optional[BsdeSolution] = None
    oracle_field: Optional[ValueField] = None


def _needs_solution(ctx: RunContext):
    if ctx.solution is None or ctx.bundle is None:
        raise ConfigError("this check reads the solve stage, which did not run", key="checks")


def run_feynman_kac_probe(ctx: RunContext, points: Optional[Sequence] = None,
                          oracle: Optional[bool] = None) -> CheckReport:
    if points is None:
        points = [(ctx.t, ctx.x.tolist()), (0.5 * (ctx.t + ctx.spec.T), ctx.x.tolist())]
    return feynman_kac_probe(ctx.spec, [(float(t), x) for t, x in points], ctx.st, reference_x=ctx.x,
                             oracle=oracle, oracle_field=ctx.oracle_field)


def run_jump_representation_check(ctx: RunContext, threshold: float = 1e-2) -> CheckReport:
    _needs_solution(ctx)
    solution = ctx.solution
    if solution.estimator is not QEstimator.MARTINGALE:
        solution = solve_lsmc(ctx.spec, ctx.bundle, ctx.st.basis, QEstimator.MARTINGALE)
    return jump_representation_check(ctx.spec, solution, ctx.bundle, threshold)


def run_u_class_check(ctx: RunContext, n_pairs: int = 2000, max_change: float = 0.2,
                      box: Optional[Sequence[Sequence[float]]] = None) -> CheckReport:
    _needs_solution(ctx)
    u = ctx.solution.u_fields
    if box is None:
        box = u.box
    return u_class_check(u, box, n_pairs=n_pairs, seed=ctx.st.seed, max_change=max_change)


def run_up_moment_check(ctx: RunContext, p: int = 2, max_log_residual: float = 1.0) -> CheckReport:
    ladder = ctx.x_ladder or [0.0, 1.0, 2.0, 4.0]
    return up_moment_check(ctx.spec, ladder, p, ctx.st, max_log_residual)


def run_uniqueness_fixed_point(ctx: RunContext, max_outer: int = 10) -> CheckReport:
    return uniqueness_fixed_point(ctx.spec, None, max_outer, ctx.st, ctx.x)


def run_uniqueness_from_starts(ctx: RunContext, perturbation: float = 0.5, max_outer: int = 10) -> CheckReport:
    return uniqueness_from_starts(ctx.spec, ctx.st, ctx.x, perturbation, max_outer)


def run_moment_estimate_check(ctx: RunContext, x_prime: Optional[Sequence[float]] = None, p: int = 2,
                              max_residual: float = 0.15) -> CheckReport:
    x_prime = ctx.x + 1.0 if x_prime is None else np.asarray(x_prime, dtype=float)
    return moment_estimate_check(ctx.spec, ctx.x, x_prime, ctx.st, p, max_residual)


def run_truncation_convergence_check(ctx: RunContext, min_spearman: float = 0.9, slack: float = 0.1) -> CheckReport:
    if not ctx.ks:
        raise ConfigError("the truncation convergence check needs truncation.ks", key="truncation.ks")
    return truncation_convergence_check(ctx.spec, ctx.x, ctx.ks, ctx.st, min_spearman, slack)


def run_picard_contraction_check(ctx: RunContext, max_ratio: float = 0.6) -> CheckReport:
    return picard_contraction_check(ctx.spec, ctx.x, ctx.st, max_ratio)


def run_oracle_agreement_check(ctx: RunContext, probe_x: Optional[Sequence[float]] = None,
                               threshold: float = 5e-2) -> CheckReport:
    probe_x = list(np.linspace(-1.0, 1.0, 9)) if probe_x is None else probe_x
    return oracle_agreement_check(ctx.spec, probe_x, ctx.st, threshold, ctx.oracle_field)


def run_estimator_agreement_check(ctx: RunContext) -> CheckReport:
    return estimator_agreement_check(ctx.spec, ctx.x, ctx.st)


def run_norm_coupling_consistency_check(ctx: RunContext) -> CheckReport:
    accepted = inspect.signature(norm_coupling_demo).parameters
    params = {k: v for k, v in ctx.spec.params.items() if k in accepted and k not in ("mode", "q_weight")}
    return norm_coupling_consistency_check(ctx.measure, ctx.x, ctx.st, **params)


def run_jump_representation_refinement(ctx: RunContext, threshold: float = 1e-2, slack: float = 0.1) -> CheckReport:
    return jump_representation_refinement(ctx.spec, ctx.x, ctx.st, threshold, slack)


CHECKS: Dict[str, Callable[..., CheckReport]] = {
    "feynman_kac_probe": run_feynman_kac_probe,
    "jump_representation_check": run_jump_representation_check,
    "u_class_check": run_u_class_check,
    "up_moment_check": run_up_moment_check,
    "uniqueness_fixed_point": run_uniqueness_fixed_point,
    "uniqueness_from_starts": run_uniqueness_from_starts,
    "moment_estimate_check": run_moment_estimate_check,
    "truncation_convergence_check": run_truncation_convergence_check,
    "picard_contraction_check": run_picard_contraction_check,
    "oracle_agreement_check": run_oracle_agreement_check,
    "estimator_agreement_check": run_estimator_agreement_check,
    "norm_coupling_consistency_check": run_norm_coupling_consistency_check,
    "jump_representation_refinement": run_jump_representation_refinement,
}


def validate_check(index: int, name: str, options: Dict) -> Callable[..., CheckReport]:
    """The runner for a configured check; unknown names and option keys name their config key."""
    if name not in CHECKS:
        raise UnknownName(f"unknown check '{name}' (registered: {', '.join(sorted(CHECKS))})",
                          key=f"checks.{index}.name")
    runner = CHECKS[name]
    accepted = [p for p in inspect.signature(runner).parameters if p != "ctx"]
    for key in options:
        if key not in accepted:
            raise ConfigError(f"unknown option '{key}' for {name}", key=f"checks.{index}.options.{key}")
    return runner
