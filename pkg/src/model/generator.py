"""Composed generators f^(i)(t, x, y, z, ζ) = h^(i)(t, x, y, z, q(ζ))."""
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from src.levy import quadrature
from src.model.spec import CouplingMode, ModelSpec


@dataclass(frozen=True)
class MarkFunction:
    """A function ζ on the mark space with a declared decay near the origin.

    decay_order follows the quadrature convention: 0 means ζ = O(1∧|e|),
    2 means ζ = O(1∧|e|²).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    decay_order: int = 0

    def __call__(self, e: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(e), dtype=float)


def zero_mark_function(dim: int = 1) -> MarkFunction:
    return MarkFunction(lambda e: np.zeros(np.shape(e)[:-1]), decay_order=2)


def coupling_scalar(spec: ModelSpec, i: int, t: float, x: np.ndarray, zeta: MarkFunction):
    """q for component i: ∫γ_i ζ dλ or ‖ζ‖_{L²(λ)} depending on the coupling mode.

    x may carry leading batch axes (..., k); the result has shape (...).
    """
    x = np.asarray(x, dtype=float)
    if spec.coupling_mode is CouplingMode.NORM_COUPLING:
        norm = l2_norm(spec, zeta)
        return norm if x.ndim == 1 else np.full(x.shape[:-1], norm)

    gamma_i = spec.gamma[i]

    def integrand(e):
        # γ_i contributes one power of |e|, so the product gains an order
        return gamma_i(t, x[..., None, :], e) * zeta(e)

    return quadrature.integrate(spec.measure, integrand, 2)


def compose_generator(spec: ModelSpec, i: int) -> Callable:
    """f^(i)(t, x, y, z, ζ) for component i (0-based).

    y has shape (m,), z shape (d,), ζ a MarkFunction.
    """
    if not 0 <= i < spec.dims.m:
        raise ValueError(f"component index {i} outside 0..{spec.dims.m - 1}")

    def f(t: float, x, y, z, zeta: Optional[MarkFunction] = None) -> float:
        x = np.asarray(x, dtype=float)
        zeta = zeta if zeta is not None else zero_mark_function(spec.dims.l)
        q = coupling_scalar(spec, i, t, x, zeta)
        return spec.h[i](t, x, np.asarray(y, dtype=float), np.asarray(z, dtype=float), q)

    return f


def l2_norm(spec: ModelSpec, zeta: MarkFunction) -> float:
    """‖ζ‖_{L²(λ)}."""
    return float(np.sqrt(max(float(quadrature.integrate(spec.measure, lambda e: zeta(e) ** 2, 2)), 0.0)))


def generator_lipschitz_in_zeta(spec: ModelSpec, i: int, h_lipschitz_q: float, n_pairs: int = 64,
                                t: float = 0.0, x=None, seed: int = 0) -> Dict[str, float]:
    """Sampled Lipschitz constant of ζ ↦ f^(i)(t, x, 0, 0, ζ) in L²(λ).

    Pairs are drawn from a fixed family of mark functions; the bound to compare
    with is C_h·sqrt(∫(1∧|e|)²dλ) in GammaIntegral mode and C_h otherwise.
    """
    rng = np.random.default_rng(seed)
    x = np.zeros(spec.dims.k) if x is None else np.asarray(x, dtype=float)
    y = np.zeros(spec.dims.m)
    z = np.zeros(spec.dims.d)
    f = compose_generator(spec, i)

    def family(coef):
        def fn(e):
            r = np.sqrt(np.sum(e * e, axis=-1))
            cap = np.minimum(1.0, r)
            return cap * (coef[0] + coef[1] * np.tanh(e[..., 0]) + coef[2] * np.cos(3.0 * r))
        return MarkFunction(fn, 0)

    worst = 0.0
    for _ in range(n_pairs):
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        za, zb = family(a), family(b)
        dist = l2_norm(spec, MarkFunction(lambda e, za=za, zb=zb: za(e) - zb(e), 0))
        if dist <= 0.0:
            continue
        diff = abs(float(f(t, x, y, z, za)) - float(f(t, x, y, z, zb)))
        worst = max(worst, diff / dist)

    if spec.coupling_mode is CouplingMode.GAMMA_INTEGRAL:
        weight = quadrature.integrate(
            spec.measure, lambda e: np.minimum(1.0, np.sum(e * e, axis=-1)), 2)
        bound = h_lipschitz_q * float(np.sqrt(max(float(weight), 0.0)))
    else:
        bound = h_lipschitz_q
    return {"estimate": worst, "bound": bound, "n_pairs": n_pairs}
