"""Exact-law sampling of jumps from a truncated Lévy measure."""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.levy.measure import TruncatedMeasure
from src.levy.quadrature import angular_rule
from src.utils.config import settings
from src.utils.errors import InfiniteMass


@dataclass(frozen=True)
class RadialSampler:
    """Inverse CDF of |e| under λ_k/Λ_k, tabulated on log-spaced radii."""

    radii: np.ndarray
    cdf: np.ndarray
    dim: int
    plus_density: np.ndarray   # only used for l = 1
    minus_density: np.ndarray

    def radius(self, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self.cdf, self.radii)

    def marks(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n marks of shape (n, l)."""
        if n == 0:
            return np.zeros((0, self.dim))
        r = self.radius(rng.random(n))
        if self.dim == 1:
            plus = np.interp(r, self.radii, self.plus_density)
            minus = np.interp(r, self.radii, self.minus_density)
            total = plus + minus
            p_plus = np.where(total > 0, plus / np.where(total > 0, total, 1.0), 0.5)
            sign = np.where(rng.random(n) < p_plus, 1.0, -1.0)
            return (sign * r)[:, None]
        direction = rng.standard_normal((n, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return r[:, None] * direction


def radial_sampler(tm: TruncatedMeasure) -> RadialSampler:
    """Build (once per truncation level) the radial inverse-CDF table."""
    base = tm.base
    key = ("sampler", tm.k)
    if key in base.cache:
        return base.cache[key]

    lo, hi = tm.threshold, base.support_radius
    radii = np.geomspace(lo, hi, settings.sampler_nodes)
    kinks = [b for b in base.breakpoints if lo < b < hi]
    for b in kinks:
        radii = np.concatenate([radii, [b * (1 - 1e-12), b * (1 + 1e-12)]])
    radii = np.unique(radii)

    dirs, ang_w = angular_rule(base.dim)
    pts = radii[:, None, None] * dirs[None, :, :]
    dens = np.asarray(base.density(pts.reshape(-1, base.dim)), dtype=float).reshape(len(radii), len(dirs))
    radial_density = radii ** (base.dim - 1) * (dens * ang_w).sum(axis=1)
    # ∫ g(r) dr = ∫ g(r) r d(log r)
    cdf = cumulative_trapezoid(radial_density * radii, np.log(radii), initial=0.0)
    if cdf[-1] > 0:
        cdf = cdf / cdf[-1]

    if base.dim == 1:
        plus, minus = dens[:, 0], dens[:, 1]
    else:
        plus = minus = np.zeros(len(radii))
    sampler = RadialSampler(radii, cdf, base.dim, plus, minus)
    base.cache[key] = sampler
    return sampler


def sample_marks(tm: TruncatedMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. marks with law λ_k/Λ_k."""
    if not np.isfinite(tm.total_mass):
        raise InfiniteMass("cannot sample from a measure with infinite mass", k=tm.k)
    if n == 0 or tm.total_mass == 0.0:
        return np.zeros((0, tm.dim))
    return radial_sampler(tm).marks(rng, n)


def sample_jumps(tm: TruncatedMeasure, t0: float, t1: float,
                 rng: np.random.Generator) -> List[Tuple[float, np.ndarray]]:
    """Poisson jump times of rate Λ_k on [t0, t1] with i.i.d. marks, in time order."""
    if not t0 < t1:
        raise ValueError(f"need t0 < t1, got [{t0}, {t1}]")
    if not np.isfinite(tm.total_mass):
        raise InfiniteMass("cannot sample from a measure with infinite mass", k=tm.k)
    if tm.total_mass == 0.0:
        return []
    count = int(rng.poisson(tm.total_mass * (t1 - t0)))
    times = np.sort(t0 + (t1 - t0) * rng.random(count))
    marks = sample_marks(tm, count, rng)
    return [(float(t), marks[i]) for i, t in enumerate(times)]
