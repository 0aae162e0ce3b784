"""Named Lévy measures addressable from experiment configs."""
import inspect
from typing import Any, Callable, Dict

import numpy as np
from scipy.special import gamma as gamma_fn

from src.levy.measure import LevyMeasure
from src.utils.config import settings
from src.utils.errors import ConfigError, UnknownName


def _norm(e: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(e * e, axis=-1))


def tempered_stable(c: float = 1.0, alpha: float = 0.5, cutoff: float = 1.0, dim: int = 1) -> LevyMeasure:
    """c·exp(-|e|/cutoff)·|e|^(-l-alpha); infinite activity for alpha ≥ 0."""
    if c < 0:
        raise ConfigError("tempered_stable intensity c must be non-negative", key="measure.params.c")
    if not 0.0 <= alpha < 2.0:
        raise ConfigError("tempered_stable alpha must lie in [0, 2)", key="measure.params.alpha")
    if cutoff <= 0:
        raise ConfigError("tempered_stable cutoff must be positive", key="measure.params.cutoff")

    def density(e):
        r = _norm(e)
        return c * np.exp(-r / cutoff) * r ** (-dim - alpha)

    return LevyMeasure(
        dim=dim,
        density=density,
        support_radius=settings.default_support_radius * cutoff,
        singularity_exponent=alpha,
        name="tempered_stable",
        params={"c": c, "alpha": alpha, "cutoff": cutoff, "dim": dim},
        breakpoints=(1.0,),
        is_zero=(c == 0.0),
    )


def finite_uniform(mass: float = 1.0, radius: float = 1.0, inner: float = None, dim: int = 1) -> LevyMeasure:
    """Uniform law on the annulus inner ≤ |e| ≤ radius scaled to total mass."""
    inner = 0.5 * radius if inner is None else inner
    if mass < 0:
        raise ConfigError("finite_uniform mass must be non-negative", key="measure.params.mass")
    if not 0.0 <= inner < radius:
        raise ConfigError("finite_uniform needs 0 ≤ inner < radius", key="measure.params.inner")

    ball = np.pi ** (dim / 2.0) / gamma_fn(dim / 2.0 + 1.0)
    volume = ball * (radius ** dim - inner ** dim)
    height = mass / volume

    def density(e):
        r = _norm(e)
        return np.where((r >= inner) & (r <= radius), height, 0.0)

    return LevyMeasure(
        dim=dim,
        density=density,
        support_radius=radius,
        singularity_exponent=0.0,
        name="finite_uniform",
        params={"mass": mass, "radius": radius, "inner": inner, "dim": dim},
        breakpoints=tuple(sorted({1.0, inner, radius} - {0.0})),
        bounded_support=True,
        is_zero=(mass == 0.0),
    )


def zero(dim: int = 1) -> LevyMeasure:
    """The null measure."""
    return LevyMeasure(
        dim=dim,
        density=lambda e: np.zeros(np.shape(e)[:-1]),
        support_radius=1.0,
        name="zero",
        params={"dim": dim},
        bounded_support=True,
        is_zero=True,
    )


MEASURES: Dict[str, Callable[..., LevyMeasure]] = {
    "tempered_stable": tempered_stable,
    "finite_uniform": finite_uniform,
    "zero": zero,
}


def check_params(factory: Callable, params: Dict[str, Any], prefix: str):
    """Reject parameter names the factory does not accept."""
    accepted = inspect.signature(factory).parameters
    for key in params:
        if key not in accepted:
            raise ConfigError(f"unknown parameter '{key}' for {factory.__name__}", key=f"{prefix}.{key}")


def build_measure(name: str, **params) -> LevyMeasure:
    """Instantiate a registered measure by name."""
    if name not in MEASURES:
        raise UnknownName(f"unknown measure '{name}' (registered: {', '.join(sorted(MEASURES))})",
                          key="measure.name")
    factory = MEASURES[name]
    check_params(factory, params, "measure.params")
    return factory(**params)
