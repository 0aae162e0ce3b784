"""Sampled checks of the standing assumptions on a ModelSpec.

Every constant here is an empirical lower bound over the probed box. Mark
bounds of the form |φ(e)| ≤ C(1∧|e|) are tested band by band on dyadic radii:
a bound holds when the ratio does not blow up in the innermost bands.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.model.spec import ModelSpec
from src.utils.logger import logger

# Dyadic mark bands probed: |e| in [2^j, 2^(j+1)) for j in [_INNER_BAND, 1]
_INNER_BAND = -30
_INNER_SPLIT = -20
_BLOWUP_FACTOR = 2.0


@dataclass
class LipschitzEstimate:
    constant: float
    pair: Tuple[np.ndarray, np.ndarray]
    samples: int


@dataclass
class GrowthFit:
    """Smallest (C, p) with |u(x)-u(x')| ≤ C(1+|x|^p+|x'|^p)|x-x'| on the sampled pairs."""

    C: float
    p: float
    n_pairs: int
    band_rates: Dict[int, float] = field(default_factory=dict)


@dataclass
class AssumptionCheck:
    name: str
    constant: float
    samples: int
    witness: Dict[str, list]
    passed: bool
    detail: str = ""

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "constant": self.constant,
            "samples": self.samples,
            "witness": self.witness,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass
class AssumptionReport:
    model: str
    box: Tuple[List[float], List[float]]
    checks: List[AssumptionCheck]
    limitations: List[str]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def constant(self, name: str) -> float:
        for c in self.checks:
            if c.name == name:
                return c.constant
        raise KeyError(name)

    def max_constant(self, prefix: str) -> float:
        values = [c.constant for c in self.checks if c.name.startswith(prefix)]
        return max(values) if values else 0.0

    @property
    def h_lipschitz(self) -> float:
        return self.max_constant("generator_lipschitz/")

    @property
    def h_lipschitz_y(self) -> float:
        return self.max_constant("generator_lipschitz_y/")

    @property
    def h_lipschitz_q(self) -> float:
        return self.max_constant("generator_lipschitz_q/")

    def failures(self) -> List[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> Dict:
        return {
            "model": self.model,
            "box": self.box,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "limitations": self.limitations,
        }


def _pairs(lo: np.ndarray, hi: np.ndarray, n: int, rng: np.random.Generator,
           coords: Optional[Sequence[int]]) -> Tuple[np.ndarray, np.ndarray]:
    """Half local pairs (log-uniform offsets), half global pairs, differing on coords only."""
    dim = len(lo)
    mask = np.zeros(dim, dtype=bool)
    mask[list(range(dim)) if coords is None else list(coords)] = True
    width = hi - lo
    p = lo + width * rng.random((n, dim))
    q = p.copy()

    n_local = n // 2
    direction = rng.standard_normal((n_local, dim)) * mask
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    scale = 10.0 ** rng.uniform(-4.0, -1.0, n_local) * np.max(width[mask])
    q[:n_local] = np.clip(p[:n_local] + direction * scale[:, None], lo, hi)

    fresh = lo + width * rng.random((n - n_local, dim))
    q[n_local:, mask] = fresh[:, mask]
    return p, q


def estimate_lipschitz(fn: Callable[[np.ndarray], np.ndarray], box: Tuple[Sequence[float], Sequence[float]],
                       directions: Optional[Sequence[int]] = None, samples: int = 2000,
                       seed: int = 0) -> LipschitzEstimate:
    """Max over sampled pairs of |fn(p)-fn(p')|/|p-p'| along the selected coordinates.

    Args:
        fn: maps points (n, D) to values (n,) or (n, r)
        box: (lo, hi), each of length D
        directions: coordinate indices that vary within a pair (None = all)
        samples: number of pairs, at least 2

    Returns:
        LipschitzEstimate with the maximising pair; a lower bound on the true constant
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    lo, hi = (np.asarray(v, dtype=float) for v in box)
    rng = np.random.default_rng(seed)
    p, q = _pairs(lo, hi, samples, rng, directions)

    fp = np.asarray(fn(p), dtype=float).reshape(samples, -1)
    fq = np.asarray(fn(q), dtype=float).reshape(samples, -1)
    coords = list(range(len(lo))) if directions is None else list(directions)
    dist = np.linalg.norm((p - q)[:, coords], axis=1)
    diff = np.linalg.norm(fp - fq, axis=1)
    valid = dist > 0
    ratio = np.zeros(samples)
    ratio[valid] = diff[valid] / dist[valid]
    best = int(np.argmax(ratio))
    return LipschitzEstimate(float(ratio[best]), (p[best], q[best]), samples)


def fit_growth_class(fn: Callable[[np.ndarray], np.ndarray], lo: Sequence[float], hi: Sequence[float],
                     n_pairs: int, seed: int = 0) -> GrowthFit:
    """Fit (C, p) of the class-𝒰 increment bound for x ↦ fn(x) on a box.

    p is the slope of the log of the maximal local rate against the log radius
    over dyadic bands of max(|x|,|x'|) ≥ 1/2; C is then the max ratio.
    """
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    rng = np.random.default_rng(seed)
    x, xp = _pairs(lo, hi, n_pairs, rng, None)
    du = np.abs(np.asarray(fn(x), dtype=float) - np.asarray(fn(xp), dtype=float)).reshape(n_pairs)
    dx = np.linalg.norm(x - xp, axis=1)
    nx, nxp = np.linalg.norm(x, axis=1), np.linalg.norm(xp, axis=1)
    valid = dx > 0
    rate = np.zeros(n_pairs)
    rate[valid] = du[valid] / dx[valid]

    radius = np.maximum(nx, nxp)
    bands = np.floor(np.log2(np.maximum(radius, 1e-300))).astype(int)
    band_rates = {}
    for j in np.unique(bands[valid]):
        if j < -1:
            continue
        band_rates[int(j)] = float(rate[valid & (bands == j)].max())
    usable = {j: r for j, r in band_rates.items() if r > 0}
    p = 0.0
    if len(usable) >= 2:
        js = np.array(sorted(usable))
        slope = np.polyfit(js * np.log(2.0), np.log([usable[j] for j in js]), 1)[0]
        p = float(max(0.0, slope))
    weight = 1.0 + nx ** p + nxp ** p
    C = float(np.max(rate / weight)) if n_pairs else 0.0
    return GrowthFit(C=C, p=p, n_pairs=n_pairs, band_rates=band_rates)


def _sample_marks(dim: int, n: int, rng: np.random.Generator, r_max: float) -> np.ndarray:
    """Marks spread evenly over dyadic radius bands down to 2^_INNER_BAND."""
    top = int(np.floor(np.log2(r_max)))
    j = rng.integers(_INNER_BAND, top + 1, n)
    r = np.minimum(2.0 ** (j + rng.random(n)), r_max)
    direction = rng.standard_normal((n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return r[:, None] * direction


def _band_check(name: str, ratio: np.ndarray, marks: np.ndarray, extra: Dict[str, np.ndarray]) -> AssumptionCheck:
    radius = np.linalg.norm(marks, axis=1)
    band = np.floor(np.log2(radius)).astype(int)
    inner = ratio[band < _INNER_SPLIT]
    reference = ratio[(band >= -4) & (band <= 0)]
    ref = float(reference.max()) if reference.size else 0.0
    passed = bool(inner.size == 0 or inner.max() <= _BLOWUP_FACTOR * ref + 1e-12)
    best = int(np.argmax(ratio))
    witness = {"e": marks[best].tolist()}
    witness.update({k: np.atleast_1d(v[best]).tolist() for k, v in extra.items()})
    detail = "" if passed else f"ratio grows toward the origin (max {ratio[best]:.3e} at |e|={radius[best]:.3e})"
    return AssumptionCheck(name, float(ratio[best]), len(ratio), witness, passed, detail)


def check_assumptions(spec: ModelSpec, box: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                      n: int = 2000, seed: int = 0, growth_exponent: float = 2.0) -> AssumptionReport:
    """Sampled checks of the coefficient, jump-size, γ, terminal and generator conditions."""
    k, d, m, l = spec.dims.k, spec.dims.d, spec.dims.m, spec.dims.l
    lo = np.full(k, -2.0) if box is None else np.asarray(box[0], dtype=float)
    hi = np.full(k, 2.0) if box is None else np.asarray(box[1], dtype=float)
    rng = np.random.default_rng(seed)
    r_max = min(spec.measure.support_radius, 4.0)
    checks: List[AssumptionCheck] = []

    def tx_box():
        return np.concatenate([[0.0], lo]), np.concatenate([[spec.T], hi])

    # b and σ Lipschitz in x
    for label, coef in (("coef_lipschitz/b", spec.b), ("coef_lipschitz/sigma", spec.sigma)):
        est = estimate_lipschitz(lambda p, coef=coef: coef(p[:, 0], p[:, 1:]).reshape(len(p), -1),
                                 tx_box(), directions=range(1, k + 1), samples=n, seed=seed)
        checks.append(AssumptionCheck(label, est.constant, n,
                                      {"p": est.pair[0].tolist(), "p'": est.pair[1].tolist()},
                                      bool(np.isfinite(est.constant))))

    # |β| ≤ C(1∧|e|) and its x-increments
    t = spec.T * rng.random(n)
    x = lo + (hi - lo) * rng.random((n, k))
    e = _sample_marks(l, n, rng, r_max)
    cap = np.minimum(1.0, np.linalg.norm(e, axis=1))
    beta_x = spec.beta(t, x, e)
    checks.append(_band_check("jump_size_bound", np.linalg.norm(beta_x, axis=1) / cap, e, {"t": t, "x": x}))

    xp, _ = _pairs(lo, hi, n, rng, None)
    xq = np.clip(xp + 0.1 * (hi - lo) * rng.standard_normal((n, k)), lo, hi)
    dx = np.maximum(np.linalg.norm(xp - xq, axis=1), 1e-300)
    dbeta = np.linalg.norm(spec.beta(t, xp, e) - spec.beta(t, xq, e), axis=1)
    checks.append(_band_check("jump_size_lipschitz", dbeta / (dx * cap), e, {"t": t, "x": xp, "x'": xq}))

    # |γ_i| ≤ C(1∧|e|) and the weighted x-increment bound
    weight = 1.0 + np.linalg.norm(xp, axis=1) ** growth_exponent + np.linalg.norm(xq, axis=1) ** growth_exponent
    for i, gamma_i in enumerate(spec.gamma):
        gx = np.broadcast_to(gamma_i(t, x, e), (n,))
        checks.append(_band_check(f"gamma_bound/{i}", np.abs(gx) / cap, e, {"t": t, "x": x}))
        dg = np.abs(gamma_i(t, xp, e) - gamma_i(t, xq, e))
        checks.append(_band_check(f"gamma_increment/{i}", np.broadcast_to(dg, (n,)) / (cap * dx * weight),
                                  e, {"t": t, "x": xp, "x'": xq}))

    # g^i in class U
    for i, g_i in enumerate(spec.g):
        fit = fit_growth_class(lambda z, g_i=g_i: np.broadcast_to(g_i(z), z.shape[:-1]), lo, hi, n, seed + i)
        checks.append(AssumptionCheck(f"terminal_growth/{i}", fit.C, n, {"p": [fit.p]}, bool(np.isfinite(fit.C)),
                                      f"class U fit C={fit.C:.4g}, p={fit.p:.3g}"))

    # h Lipschitz in (y, z, q); the point is (t, x, y, z, q)
    ylo, yhi = -2.0, 2.0
    plo = np.concatenate([[0.0], lo, np.full(m + d + 1, ylo)])
    phi = np.concatenate([[spec.T], hi, np.full(m + d + 1, yhi)])
    y_slice = slice(1 + k, 1 + k + m)
    z_slice = slice(1 + k + m, 1 + k + m + d)
    q_index = 1 + k + m + d

    for i, h_i in enumerate(spec.h):
        def h_of(p, h_i=h_i):
            return np.broadcast_to(h_i(p[:, 0], p[:, 1:1 + k], p[:, y_slice], p[:, z_slice], p[:, q_index]),
                                   (len(p),))

        for label, coords in (("generator_lipschitz", range(1 + k, q_index + 1)),
                              ("generator_lipschitz_y", range(1 + k, 1 + k + m)),
                              ("generator_lipschitz_q", [q_index])):
            est = estimate_lipschitz(h_of, (plo, phi), directions=coords, samples=n, seed=seed + 7 * i)
            checks.append(AssumptionCheck(f"{label}/{i}", est.constant, n,
                                          {"p": est.pair[0].tolist(), "p'": est.pair[1].tolist()},
                                          bool(np.isfinite(est.constant))))

        # x-regularity of h at a few frozen (t, y, z, q)
        frozen = plo + (phi - plo) * rng.random((4, len(plo)))
        worst = GrowthFit(0.0, 0.0, n)
        for row in frozen:
            def h_x(xx, row=row, h_i=h_i):
                return np.broadcast_to(h_i(row[0], xx, row[y_slice], row[z_slice], row[q_index]), xx.shape[:-1])
            fit = fit_growth_class(h_x, lo, hi, n // 4 + 2, seed + 11 * i)
            if fit.C > worst.C:
                worst = fit
        checks.append(AssumptionCheck(f"generator_x_growth/{i}", worst.C, n, {"p": [worst.p]}, bool(np.isfinite(worst.C)),
                                      f"class U fit C={worst.C:.4g}, p={worst.p:.3g}"))

        # polynomial growth of x ↦ h(t, x, 0, 0, 0)
        ladder = np.array([0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
        direction = np.ones(k) / np.sqrt(k)
        pts = ladder[:, None] * direction[None, :]
        tt = spec.T * rng.random(len(ladder))
        vals = np.abs(np.broadcast_to(h_i(tt, pts, np.zeros((len(ladder), m)), np.zeros((len(ladder), d)),
                                          np.zeros(len(ladder))), (len(ladder),)))
        slope = np.polyfit(np.log(ladder), np.log(vals + 1e-300), 1)[0] if np.all(vals > 0) else 0.0
        p_fit = float(max(0.0, slope))
        C = float(np.max(vals / (1.0 + ladder ** p_fit)))
        checks.append(AssumptionCheck(f"generator_growth_at_zero/{i}", C, len(ladder), {"p": [p_fit]}, bool(np.isfinite(C)),
                                      f"|f(t,x,0,0,0)| ≤ {C:.4g}(1+|x|^{p_fit:.3g})"))

    limitations = [
        "x-regularity of h is probed at finitely many frozen (y, z, q)",
        "constants are sampled lower bounds over the probed box, not proofs",
    ]
    report = AssumptionReport(spec.name, (lo.tolist(), hi.tolist()), checks, limitations)
    for failure in report.failures():
        logger.warning(f"{spec.name}: assumption {failure.name} failed: {failure.detail} witness={failure.witness}")
    return report


def max_stable_dt(spec: ModelSpec, report: Optional[AssumptionReport] = None, n: int = 1000) -> float:
    """Largest Δt for which the implicit y-step is a contraction (1/Ĉ_y)."""
    report = report or check_assumptions(spec, n=n)
    c_y = report.h_lipschitz_y
    return float("inf") if c_y <= 0 else 1.0 / c_y
