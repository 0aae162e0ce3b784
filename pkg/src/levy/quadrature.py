"""Radial quadrature against Lévy measures.

Integrals over E = R^l minus the origin are computed in polar form: geometric
shells from the support radius down to a radial floor, Gauss-Legendre nodes on
every shell and a fixed angular rule on the sphere. The contribution of the
ball below the floor is extrapolated from the decay of the last two shells.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn

from src.utils.config import settings
from src.utils.errors import DivergentIntegral, QuadratureFailure, SlowDecay

# Radii at which the decay of an integrand near the origin is probed.
_PROBE_RADII = 2.0 ** -np.arange(4, 16, 2)
_ACTIVITY_PROBE_RATIO = 0.99


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for ∫ φ dλ over the annulus r_lo ≤ |e| ≤ r_hi."""

    nodes: np.ndarray      # (q, l)
    weights: np.ndarray    # (q,) density already folded in
    shell: np.ndarray      # (q,) shell index, 0 = outermost
    n_shells: int
    r_lo: float
    r_hi: float
    open_at_origin: bool   # True when the ball below r_lo must be extrapolated

    def shell_sums(self, values: np.ndarray) -> np.ndarray:
        """Per-shell partial sums of values * weights; values has shape (..., q)."""
        weighted = values * self.weights
        starts = np.searchsorted(self.shell, np.arange(self.n_shells))
        return np.add.reduceat(weighted, starts, axis=-1)


@dataclass
class ValidationReport:
    """Outcome of the ∫(1∧|e|²)dλ refinement study."""

    measure: str
    levels: List[int]
    values: List[float]
    relative_changes: List[float]
    passed: bool
    value: float
    mass_beyond_radius: float
    infinite_activity: bool
    tolerance: float = field(default_factory=lambda: settings.quadrature_rtol)

    def to_dict(self) -> Dict:
        return {
            "measure": self.measure,
            "levels": self.levels,
            "values": self.values,
            "relative_changes": self.relative_changes,
            "passed": self.passed,
            "value": self.value,
            "mass_beyond_radius": self.mass_beyond_radius,
            "infinite_activity": self.infinite_activity,
            "tolerance": self.tolerance,
        }


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (2 points for dim 1)."""
    return float(2.0 * np.pi ** (dim / 2.0) / gamma_fn(dim / 2.0))


def angular_rule(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Directions on the unit sphere and their weights (summing to the sphere area)."""
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif dim == 2:
        theta = 2.0 * np.pi * (np.arange(32) + 0.5) / 32
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    elif dim == 3:
        n = 64
        i = np.arange(n) + 0.5
        polar = np.arccos(1.0 - 2.0 * i / n)
        azimuth = np.pi * (1.0 + 5.0 ** 0.5) * i
        dirs = np.stack([
            np.cos(azimuth) * np.sin(polar),
            np.sin(azimuth) * np.sin(polar),
            np.cos(polar),
        ], axis=-1)
    else:
        rng = np.random.default_rng(dim)
        raw = rng.standard_normal((256, dim))
        dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    weights = np.full(len(dirs), sphere_area(dim) / len(dirs))
    return dirs, weights


def shell_edges(r_lo: float, r_hi: float, ratio: float, floor: float,
                breakpoints: Tuple[float, ...] = ()) -> np.ndarray:
    """Descending shell edges from r_hi to max(r_lo, floor), split at breakpoints."""
    bottom = max(r_lo, floor)
    if r_hi <= bottom:
        return np.array([r_hi])
    n = int(np.ceil(np.log(r_hi / bottom) / np.log(ratio) - 1e-9))
    edges = r_hi / ratio ** np.arange(n + 1)
    edges[-1] = bottom
    extra = [b for b in breakpoints if bottom < b < r_hi]
    edges = np.unique(np.concatenate([edges, extra]))[::-1]
    return edges


def build_rule(measure, r_lo: float = 0.0, r_hi: Optional[float] = None,
               ratio: Optional[float] = None, floor: Optional[float] = None) -> QuadratureRule:
    """Build (or fetch from the measure's cache) the rule for an annulus."""
    r_hi = measure.support_radius if r_hi is None else min(r_hi, measure.support_radius)
    ratio = settings.shell_ratio if ratio is None else ratio
    floor = settings.radial_floor if floor is None else floor
    key = ("rule", float(r_lo), float(r_hi), float(ratio), float(floor))
    cached = measure.cache.get(key)
    if cached is not None:
        return cached

    dim = measure.dim
    edges = shell_edges(r_lo, r_hi, ratio, floor, measure.breakpoints)
    if len(edges) < 2:
        rule = QuadratureRule(np.zeros((0, dim)), np.zeros(0), np.zeros(0, dtype=int), 0,
                              r_lo, r_hi, False)
        measure.cache[key] = rule
        return rule

    gl_x, gl_w = np.polynomial.legendre.leggauss(settings.shell_points)
    dirs, ang_w = angular_rule(dim)
    outer, inner = edges[:-1], edges[1:]
    half = 0.5 * (outer - inner)
    mid = 0.5 * (outer + inner)
    radii = mid[:, None] + half[:, None] * gl_x[None, :]            # (s, g)
    rad_w = half[:, None] * gl_w[None, :] * radii ** (dim - 1)       # (s, g)

    nodes = radii[:, :, None, None] * dirs[None, None, :, :]         # (s, g, a, l)
    weights = rad_w[:, :, None] * ang_w[None, None, :]               # (s, g, a)
    n_shells = len(outer)
    nodes = nodes.reshape(-1, dim)
    weights = weights.reshape(-1)
    shell = np.repeat(np.arange(n_shells), settings.shell_points * len(dirs))

    density = np.asarray(measure.density(nodes), dtype=float)
    if density.shape != weights.shape or not np.all(np.isfinite(density)):
        raise QuadratureFailure(f"density of {measure.name} is not finite on the quadrature nodes",
                                measure=measure.name)
    if np.any(density < 0):
        raise QuadratureFailure(f"density of {measure.name} is negative", measure=measure.name)

    rule = QuadratureRule(
        nodes=nodes,
        weights=weights * density,
        shell=shell,
        n_shells=n_shells,
        r_lo=float(r_lo),
        r_hi=float(r_hi),
        open_at_origin=r_lo <= 0.0,
    )
    measure.cache[key] = rule
    return rule


def _inner_tail(shells: np.ndarray, total: np.ndarray, rtol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Geometric extrapolation of the ball below the floor; returns (tail, diverging mask)."""
    last = shells[..., -1]
    prev = shells[..., -2] if shells.shape[-1] > 1 else np.zeros_like(last)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(prev != 0.0, last / prev, np.inf)
    significant = np.abs(last) > rtol * np.abs(total) + 1e-300
    diverging = significant & (q >= 1.0)
    converging = (np.abs(q) < 1.0) & (last != 0.0)
    q_safe = np.where(converging, q, 0.0)
    tail = np.where(converging, last * q_safe / (1.0 - q_safe), 0.0)
    return tail, diverging


def _probe_decay(measure, phi: Callable, order: int, r_hi: float):
    """Raise SlowDecay when |φ| near the origin decays slower than |e|^(declared order)."""
    required = 1.0 if order == 0 else 2.0
    radii = _PROBE_RADII[_PROBE_RADII < min(1.0, r_hi)]
    if len(radii) < 3:
        return
    dirs, _ = angular_rule(measure.dim)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, measure.dim)
    vals = np.abs(np.asarray(phi(pts), dtype=float))
    vals = vals.reshape(vals.shape[:-1] + (len(radii), len(dirs))).max(axis=-1)
    vals = vals.reshape(-1, len(radii)).max(axis=0)
    if np.all(vals <= 1e-300):
        return
    if np.any(vals <= 1e-300):
        return
    slope = np.polyfit(np.log(radii), np.log(vals), 1)[0]
    if slope < required - 0.25:
        raise SlowDecay(
            f"integrand decays like |e|^{slope:.2f} near 0, declared order needs |e|^{required:.0f}",
            measure=measure.name, slope=float(slope), required=required,
        )


def integrate(measure, phi: Callable[[np.ndarray], np.ndarray], taylor_order: int = 0,
              r_lo: float = 0.0, r_hi: Optional[float] = None, *,
              ratio: Optional[float] = None, floor: Optional[float] = None):
    """Integrate φ against λ over r_lo ≤ |e| ≤ r_hi.

    Args:
        measure: LevyMeasure (or anything with density/dim/support_radius/cache)
        phi: callable mapping marks of shape (q, l) to values of shape (..., q)
        taylor_order: 0 when φ = O(1∧|e|), 2 when φ = O(1∧|e|²)
        r_lo: lower radius; 0 integrates up to the origin with tail extrapolation

    Returns:
        float, or an array with φ's leading shape
    """
    if taylor_order not in (0, 2):
        raise ValueError(f"taylor_order must be 0 or 2, got {taylor_order}")
    if measure.is_zero:
        sample = np.asarray(phi(np.ones((1, measure.dim))), dtype=float)
        zero = np.zeros(sample.shape[:-1])
        return float(zero) if zero.ndim == 0 else zero

    rule = build_rule(measure, r_lo, r_hi, ratio, floor)
    if rule.n_shells == 0:
        sample = np.asarray(phi(np.ones((1, measure.dim))), dtype=float)
        zero = np.zeros(sample.shape[:-1])
        return float(zero) if zero.ndim == 0 else zero

    values = np.asarray(phi(rule.nodes), dtype=float)
    if values.shape[-1] != len(rule.weights):
        raise QuadratureFailure("integrand returned the wrong trailing shape",
                                expected=len(rule.weights), got=values.shape)
    if not np.all(np.isfinite(values)):
        raise QuadratureFailure("integrand is not finite on the quadrature nodes", measure=measure.name)

    shells = rule.shell_sums(values)
    total = shells.sum(axis=-1)
    if rule.open_at_origin and measure.is_infinite_activity:
        tail, diverging = _inner_tail(shells, total, settings.quadrature_rtol)
        if np.any(diverging):
            raise SlowDecay(
                f"∫φ dλ diverges at the origin for {measure.name} (shell sums do not decay)",
                measure=measure.name,
            )
        _probe_decay(measure, phi, taylor_order, rule.r_hi)
        total = total + tail
    return float(total) if np.ndim(total) == 0 else total


def infinite_activity(measure) -> bool:
    """Whether shell masses fail to decay toward the origin."""
    rule = build_rule(measure, 0.0, min(1.0, measure.support_radius))
    if rule.n_shells < 2:
        return False
    masses = rule.shell_sums(np.ones(len(rule.weights)))
    last, prev = masses[-1], masses[-2]
    if last <= 0.0:
        return False
    return bool(prev <= 0.0 or last / prev >= _ACTIVITY_PROBE_RATIO)


def validate(measure, refinement_levels: int = 3) -> ValidationReport:
    """Check that ∫(1∧|e|²)dλ is finite and stable under shell refinement.

    Level j uses shell ratio 2^(2^-j) and a radial floor 2^(-40-10j).
    """
    if refinement_levels < 1:
        raise ValueError("refinement_levels must be positive")
    if measure.is_zero:
        levels = list(range(refinement_levels))
        return ValidationReport(measure.name, levels, [0.0] * len(levels),
                                [0.0] * max(len(levels) - 1, 0), True, 0.0, 0.0, False)

    def weight(e):
        r2 = np.sum(e * e, axis=-1)
        return np.minimum(1.0, r2)

    values, changes = [], []
    for level in range(refinement_levels):
        ratio = 2.0 ** (2.0 ** -level)
        floor = 2.0 ** (-40 - 10 * level)
        rule = build_rule(measure, 0.0, None, ratio, floor)
        shells = rule.shell_sums(weight(rule.nodes))
        total = shells.sum()
        tail, diverging = _inner_tail(shells, np.asarray(total), settings.quadrature_rtol)
        if bool(diverging):
            raise DivergentIntegral(
                f"∫(1∧|e|²)dλ diverges for {measure.name}: shell sums grow toward the origin",
                measure=measure.name, level=level, last_shells=shells[-3:],
            )
        value = float(total + tail)
        if values:
            scale = max(abs(values[-1]), 1e-300)
            changes.append(abs(value - values[-1]) / scale)
        values.append(value)

    if len(values) > 1 and values[-1] > 10.0 * max(values[0], 1e-300) and values[0] > 0:
        raise DivergentIntegral(
            f"∫(1∧|e|²)dλ keeps growing under refinement for {measure.name}",
            measure=measure.name, values=values,
        )

    passed = all(c < settings.quadrature_rtol for c in changes)
    beyond = mass_beyond_radius(measure)
    return ValidationReport(
        measure=measure.name,
        levels=list(range(refinement_levels)),
        values=values,
        relative_changes=changes,
        passed=passed,
        value=values[-1],
        mass_beyond_radius=beyond,
        infinite_activity=infinite_activity(measure),
    )


def mass_beyond_radius(measure, factor: float = 16.0) -> float:
    """λ(R < |e| ≤ factor·R) for densities that do not vanish past the support radius."""
    if measure.bounded_support:
        return 0.0
    r = measure.support_radius
    edges = r * settings.shell_ratio ** np.arange(int(np.log(factor) / np.log(settings.shell_ratio)) + 1)
    gl_x, gl_w = np.polynomial.legendre.leggauss(settings.shell_points)
    dirs, ang_w = angular_rule(measure.dim)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        radii = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gl_x
        pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, measure.dim)
        dens = np.asarray(measure.density(pts), dtype=float).reshape(len(radii), len(dirs))
        total += float(0.5 * (hi - lo) * np.sum(gl_w[:, None] * radii[:, None] ** (measure.dim - 1)
                                                 * ang_w[None, :] * dens))
    return total
