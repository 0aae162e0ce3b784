"""Pointwise IPDE residual of a value field."""
from enum import Enum

import numpy as np

from src.model.spec import ModelSpec, as_points
from src.operators.nonlocal_ops import NonlocalOperator, check_derivatives


class ViscosityDefinition(str, Enum):
    # coupling B_i applied to the candidate field itself
    OUR_DEF = "OurDef"
    # coupling B_i applied to the test function; a smooth field is its own test function
    BBP = "BBP"


def _time_derivative(u, t: float, X: np.ndarray) -> np.ndarray:
    """Forward difference in time on the field's own time nodes (backward at the last node)."""
    times = np.asarray(getattr(u, "times", []))
    if len(times) < 2:
        tau = 1e-4
        return (u(t + tau, X) - u(t - tau, X)) / (2 * tau)
    j = int(np.clip(np.searchsorted(times, t + 1e-12, side="right") - 1, 0, len(times) - 1))
    if j == len(times) - 1:
        return (u(times[j], X) - u(times[j - 1], X)) / (times[j] - times[j - 1])
    return (u(times[j + 1], X) - u(times[j], X)) / (times[j + 1] - times[j])


def residual(u, spec: ModelSpec, t: float, x, definition: ViscosityDefinition = ViscosityDefinition.OUR_DEF,
             i: int = 0) -> float:
    """-∂_t u^i - bᵀD u^i - ½Tr(σσᵀD²u^i) - K u^i - h^(i)(t, x, u, σᵀD u, B_i u) at (t, x).

    Derivatives are finite differences of the field; the gradient is rejected
    when its two stencils disagree.
    """
    definition = ViscosityDefinition(definition)
    X = as_points(x, spec.dims.k)[None, :]
    test_fn = u        # both definitions put the coupling on a smooth field
    op = NonlocalOperator(spec, u, check=False)
    coupling_op = NonlocalOperator(spec, test_fn, check=False)

    grad = np.stack([check_derivatives(u, t, X, c) for c in range(spec.dims.m)], axis=-2)   # (1, m, k)
    hess = u.hessian(t, X)                                                                  # (1, m, k, k)
    sigma = spec.sigma(t, X)                                                                # (1, k, d)
    a = np.einsum("nkd,nld->nkl", sigma, sigma)

    dt_u = _time_derivative(u, t, X)[0, i]
    drift = float(spec.b(t, X)[0] @ grad[0, i])
    diffusion = 0.5 * float(np.einsum("kl,kl->", a[0], hess[0, i]))
    K = float(op.K(i, t, X)[0])
    z = np.einsum("nkd,nmk->nmd", sigma, grad)
    q = np.array([[coupling_op.coupling(c, t, X)[0] for c in range(spec.dims.m)]])
    h = float(spec.generator(t, X, u(t, X), z, q)[0, i])
    return float(-dt_u - drift - diffusion - K - h)
