"""Exception hierarchy.

Two families: configuration problems (exit code 2) and numerical failures
(exit code 3). Errors keep their context as attributes so the pipeline can
serialise it next to the completed stages.
"""
from typing import Any, Dict, Optional, Sequence


class JumpBsdeError(Exception):
    """Base class for all library errors."""

    exit_code = 3

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "context": {k: _plain(v) for k, v in self.context.items()},
        }


class ConfigError(JumpBsdeError):
    """Invalid experiment configuration; the message names the offending key."""

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None, **context: Any):
        super().__init__(message, key=key, **context)
        self.key = key


class UnknownName(ConfigError):
    """A model or measure name that is not registered."""


class InadmissibleBasis(ConfigError):
    """Regression basis too large for the number of paths."""


class NumericError(JumpBsdeError):
    """A numerical procedure failed."""

    exit_code = 3


class DivergentIntegral(NumericError):
    pass


class SlowDecay(NumericError):
    pass


class InfiniteMass(NumericError):
    pass


class QuadratureFailure(NumericError):
    pass


class NonFiniteState(NumericError):
    def __init__(self, message: str, step: int, path: int, **context: Any):
        super().__init__(message, step=step, path=path, **context)
        self.step = step
        self.path = path


class GridMismatch(NumericError):
    pass


class IllConditionedDerivative(NumericError):
    pass


class SingularRegression(NumericError):
    def __init__(self, message: str, step: int, condition: float, **context: Any):
        super().__init__(message, step=step, condition=condition, **context)
        self.step = step
        self.condition = condition


class NonConvergence(NumericError):
    pass


class ContractionStall(NumericError):
    def __init__(self, message: str, window: int, deltas: Sequence[float], **context: Any):
        super().__init__(message, window=window, deltas=list(deltas), **context)
        self.window = window
        self.deltas = list(deltas)


class CflViolation(NumericError):
    pass


class TridiagonalSingular(NumericError):
    pass


class EstimatorUnavailable(NumericError):
    pass


class NoConvergence(NumericError):
    def __init__(self, message: str, trace: Sequence[float], **context: Any):
        super().__init__(message, trace=list(trace), **context)
        self.trace = list(trace)


class ArtifactFormatError(JumpBsdeError):
    """A file is not a readable artifact container."""


def _plain(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


__all__ = [
    "JumpBsdeError",
    "ConfigError",
    "UnknownName",
    "InadmissibleBasis",
    "NumericError",
    "DivergentIntegral",
    "SlowDecay",
    "InfiniteMass",
    "QuadratureFailure",
    "NonFiniteState",
    "GridMismatch",
    "IllConditionedDerivative",
    "SingularRegression",
    "NonConvergence",
    "ContractionStall",
    "CflViolation",
    "TridiagonalSingular",
    "EstimatorUnavailable",
    "NoConvergence",
    "ArtifactFormatError",
]
