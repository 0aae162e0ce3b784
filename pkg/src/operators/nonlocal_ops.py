"""Nonlocal operators B_i, ‖·‖-variant of B_i, and K on value fields.

Each integral is split at the derivative-safe radius, the largest dyadic
radius on which |β| stays below half a lattice cell. Above it the field is
interpolated at x + β directly. Below it the marks are integrated in dyadic
bands with the gradient rule ½βᵀ(D_xu(x) + D_xu(x+β)) until the innermost
shell [r_min, ε) is negligible: its contribution bound, built from the
lattice gradient and the Hessian norm, must stay under 1e-8 of the running
total. That last shell uses the second-order Taylor expansion at x.
"""
from typing import Callable, Optional

import numpy as np

from src.levy import quadrature
from src.model.spec import CouplingMode, ModelSpec
from src.utils.errors import IllConditionedDerivative

_DERIVATIVE_RTOL = 1e-3
_MAX_DYADIC = 60
# Taylor shell bound against the running total, plus a round-off floor
SHELL_RTOL = 1e-8
SHELL_ATOL = 1e-14
# keeps (points × quadrature nodes) per block bounded
_BLOCK_ENTRIES = 2_000_000


def check_derivatives(field, t, X: np.ndarray, i: Optional[int] = None) -> np.ndarray:
    """D_x u with stencil h, raising when the 2h stencil disagrees by more than 1e-3 relative."""
    g1 = field.gradient(t, X, stencil=1)
    g2 = field.gradient(t, X, stencil=2)
    if i is not None:
        g1, g2 = g1[..., i, :], g2[..., i, :]
    scale = np.maximum(1.0, np.abs(g1))
    gap = np.abs(g1 - g2) / scale
    if np.any(gap > _DERIVATIVE_RTOL):
        worst = np.unravel_index(int(np.argmax(gap)), gap.shape)
        raise IllConditionedDerivative(
            f"finite differences disagree across stencils by {gap.max():.2e} (tolerance {_DERIVATIVE_RTOL})",
            worst_index=list(worst), gap=float(gap.max()),
        )
    return g1


def taylor_radius(spec: ModelSpec, field, t: float, X: np.ndarray) -> float:
    """Largest dyadic radius ≤ 1 on which |β(t, X, e)| stays below half a lattice cell."""
    measure = spec.measure
    top = min(1.0, measure.support_radius)
    half_cell = 0.5 * float(np.min(field.spacing))
    dirs, _ = quadrature.angular_rule(spec.dims.l)
    for j in range(_MAX_DYADIC):
        r = top * 2.0 ** -j
        jumps = spec.beta(t, X[:, None, :], r * dirs[None, :, :])
        if float(np.max(np.linalg.norm(jumps, axis=-1))) <= half_cell:
            return r
    return top * 2.0 ** -_MAX_DYADIC


class NonlocalOperator:
    """B_i, B_i-norm, K and the jump energy of a field at a batch of states.

    r_min = 1/k restricts every integral to the truncated measure λ_k.
    shell_radius holds the Taylor radius ε chosen by the last call.
    """

    def __init__(self, spec: ModelSpec, field, r_min: float = 0.0, check: bool = True):
        self.spec = spec
        self.field = field
        self.r_min = float(r_min)
        self.check = check
        self.shell_radius: Optional[float] = None

    def _split(self, t: float, X: np.ndarray):
        cap = taylor_radius(self.spec, self.field, t, X)
        return cap, max(cap, self.r_min)

    def _blocks(self, X: np.ndarray, n_nodes: int):
        size = max(1, _BLOCK_ENTRIES // max(n_nodes, 1))
        for s in range(0, len(X), size):
            yield slice(s, s + size)

    def _integrate(self, phi_factory, X: np.ndarray, order: int, r_lo: float, r_hi: Optional[float]) -> np.ndarray:
        """Σ over blocks of ∫ phi dλ on r_lo ≤ |e| ≤ r_hi; phi_factory(block) gives e (q,l) -> (n_block, q)."""
        if r_hi is not None and r_hi <= r_lo:
            return np.zeros(len(X))
        rule = quadrature.build_rule(self.spec.measure, r_lo, r_hi)
        out = np.empty(len(X))
        for blk in self._blocks(X, max(len(rule.weights), 1)):
            out[blk] = quadrature.integrate(self.spec.measure, phi_factory(blk), order, r_lo, r_hi)
        return out

    def _jumps(self, t, Xb: np.ndarray, e: np.ndarray) -> np.ndarray:
        return self.spec.beta(t, Xb[:, None, :], e[None, :, :])           # (n, q, k)

    def _increment(self, t, X, i):
        def factory(blk):
            Xb = X[blk]
            base = self.field(t, Xb)[:, i]

            def phi(e):
                return self.field(t, Xb[:, None, :] + self._jumps(t, Xb, e))[..., i] - base[:, None]
            return phi
        return factory

    def _gradient_increment(self, t, X, i, grad):
        """Sub-cell increments ½βᵀ(D_xu(x) + D_xu(x+β)), third-order accurate in β."""
        def factory(blk):
            Xb, gb = X[blk], grad[blk]

            def phi(e):
                jumps = self._jumps(t, Xb, e)
                target = self.field.gradient(t, Xb[:, None, :] + jumps)[..., i, :]      # (n, q, k)
                return 0.5 * np.einsum("nqk,nqk->nq", jumps, target + gb[:, None, :])
            return phi
        return factory

    def _taylor_increment(self, t, X, grad, hess):
        def factory(blk):
            Xb, gb, hb = X[blk], grad[blk], hess[blk]

            def phi(e):
                jumps = self._jumps(t, Xb, e)
                first = np.einsum("nqk,nk->nq", jumps, gb)
                return first + 0.5 * np.einsum("nqk,nkl,nql->nq", jumps, hb, jumps)
            return phi
        return factory

    def _taylor_pieces(self, t, X, i):
        grad = check_derivatives(self.field, t, X, i) if self.check else self.field.gradient(t, X)[..., i, :]
        hess = self.field.hessian(t, X)[..., i, :, :]
        return grad, hess

    def _below_cap(self, t, X, total: np.ndarray, cap: float, band, shell,
                   bound: Callable[[float], np.ndarray]) -> np.ndarray:
        """Add the marks r_min ≤ |e| < cap to total.

        Dyadic bands [ε/2, ε) go through `band` while bound(ε), the largest
        possible contribution of the shell [r_min, ε), exceeds
        SHELL_RTOL·|total|; the final shell goes through `shell`.
        """
        eps = cap
        for _ in range(_MAX_DYADIC):
            if eps <= self.r_min:
                break
            if np.all(bound(eps) <= SHELL_RTOL * np.abs(total) + SHELL_ATOL):
                break
            lo = max(0.5 * eps, self.r_min)
            total = total + self._integrate(band, X, 2, lo, eps)
            eps = lo
        if eps > self.r_min:
            total = total + self._integrate(shell, X, 2, self.r_min, eps)
        self.shell_radius = eps
        return total

    def _shell_integral(self, t, X, weight, r_hi: float) -> np.ndarray:
        """∫_{r_min ≤ |e| < r_hi} weight(block, e, |β|) dλ per point."""
        def factory(blk):
            Xb = X[blk]
            return lambda e: weight(blk, e, np.linalg.norm(self._jumps(t, Xb, e), axis=-1))
        return self._integrate(factory, X, 2, self.r_min, r_hi)

    @staticmethod
    def _norms(grad: np.ndarray, hess: np.ndarray):
        return np.linalg.norm(grad, axis=-1), np.linalg.norm(hess, ord=2, axis=(-2, -1))

    def B(self, i: int, t: float, X: np.ndarray) -> np.ndarray:
        """∫ γ_i(t,x,e)[u^i(t,x+β) - u^i(t,x)] λ(de)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.spec.measure.is_zero:
            return np.zeros(len(X))
        cap, outer_lo = self._split(t, X)
        gamma_i = self.spec.gamma[i]

        def weighted(factory):
            def wrapped(blk):
                phi_inc = factory(blk)
                Xb = X[blk]
                return lambda e: gamma_i(t, Xb[:, None, :], e[None, :, :]) * phi_inc(e)
            return wrapped

        total = self._integrate(weighted(self._increment(t, X, i)), X, 2, outer_lo, None)
        if cap > self.r_min:
            grad, hess = self._taylor_pieces(t, X, i)
            g_norm, h_norm = self._norms(grad, hess)

            def bound(eps):
                def weight(blk, e, size):
                    gamma = np.abs(gamma_i(t, X[blk][:, None, :], e[None, :, :]))
                    return gamma * (g_norm[blk, None] * size + 0.5 * h_norm[blk, None] * size ** 2)
                return self._shell_integral(t, X, weight, eps)

            total = self._below_cap(t, X, total, cap, weighted(self._gradient_increment(t, X, i, grad)),
                                    weighted(self._taylor_increment(t, X, grad, hess)), bound)
        return total

    def jump_energy(self, i: int, t: float, X: np.ndarray) -> np.ndarray:
        """∫ |u^i(t,x+β) - u^i(t,x)|² λ(de)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.spec.measure.is_zero:
            return np.zeros(len(X))
        cap, outer_lo = self._split(t, X)

        def squared(factory):
            def wrapped(blk):
                phi_inc = factory(blk)
                return lambda e: phi_inc(e) ** 2
            return wrapped

        total = self._integrate(squared(self._increment(t, X, i)), X, 2, outer_lo, None)
        if cap > self.r_min:
            grad, hess = self._taylor_pieces(t, X, i)
            g_norm, h_norm = self._norms(grad, hess)

            def bound(eps):
                def weight(blk, e, size):
                    return (g_norm[blk, None] * size + 0.5 * h_norm[blk, None] * size ** 2) ** 2
                return self._shell_integral(t, X, weight, eps)

            total = self._below_cap(t, X, total, cap, squared(self._gradient_increment(t, X, i, grad)),
                                    squared(self._taylor_increment(t, X, grad, hess)), bound)
        return np.maximum(total, 0.0)

    def B_norm(self, i: int, t: float, X: np.ndarray) -> np.ndarray:
        """sqrt(∫ |u^i(t,x+β) - u^i(t,x)|² λ(de))."""
        return np.sqrt(self.jump_energy(i, t, X))

    def K(self, i: int, t: float, X: np.ndarray) -> np.ndarray:
        """∫ [u^i(t,x+β) - u^i(t,x) - βᵀD_x u^i(t,x)] λ(de)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.spec.measure.is_zero:
            return np.zeros(len(X))
        cap, outer_lo = self._split(t, X)
        grad, hess = self._taylor_pieces(t, X, i)

        def compensated(factory):
            def wrapped(blk):
                phi_inc = factory(blk)
                Xb, gb = X[blk], grad[blk]
                return lambda e: phi_inc(e) - np.einsum("nqk,nk->nq", self._jumps(t, Xb, e), gb)
            return wrapped

        total = self._integrate(compensated(self._increment(t, X, i)), X, 2, outer_lo, None)
        if cap > self.r_min:
            _, h_norm = self._norms(grad, hess)

            def bound(eps):
                return 0.5 * h_norm * self._shell_integral(t, X, lambda blk, e, size: size ** 2, eps)

            total = self._below_cap(t, X, total, cap, compensated(self._gradient_increment(t, X, i, grad)),
                                    compensated(self._taylor_increment(t, X, grad, hess)), bound)
        return total

    def coupling(self, i: int, t: float, X: np.ndarray) -> np.ndarray:
        """The q channel of component i under the model's coupling mode."""
        if self.spec.coupling_mode is CouplingMode.NORM_COUPLING:
            return self.B_norm(i, t, X)
        return self.B(i, t, X)


def _single(result: np.ndarray, x) -> float:
    return float(result[0]) if np.ndim(x) == 1 else result


def eval_B(u, i: int, spec: ModelSpec, t: float, x):
    """B_i u at (t, x); x of shape (k,) gives a float, (n, k) an array."""
    if spec.coupling_mode is not CouplingMode.GAMMA_INTEGRAL:
        raise ValueError("eval_B needs the GammaIntegral coupling mode; use eval_B_norm")
    return _single(NonlocalOperator(spec, u).B(i, t, x), x)


def eval_B_norm(u, i: int, spec: ModelSpec, t: float, x):
    """Norm variant of B_i at (t, x)."""
    if spec.coupling_mode is not CouplingMode.NORM_COUPLING:
        raise ValueError("eval_B_norm needs the NormCoupling mode; use eval_B")
    return _single(NonlocalOperator(spec, u).B_norm(i, t, x), x)


def eval_K(u, spec: ModelSpec, t: float, x, i: int = 0):
    """K u^i at (t, x)."""
    return _single(NonlocalOperator(spec, u).K(i, t, x), x)
