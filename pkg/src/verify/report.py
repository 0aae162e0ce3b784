"""Check reports."""
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from src.utils.logger import logger

SAMPLE_SIZE_KEYS = ("n_paths", "n_pairs")


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def digest_of(inputs: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON of the inputs."""
    canonical = json.dumps(_plain(inputs), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class CheckReport:
    name: str
    inputs: Dict[str, Any]
    statistic: Dict[str, Any]
    threshold: Dict[str, Any]
    passed: bool
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    gated: bool = True

    @property
    def digest(self) -> str:
        return digest_of(self.inputs)

    @property
    def seed(self):
        return self.inputs.get("seed")

    @property
    def sample_size_key(self) -> str:
        """"n_paths" for path-based checks, "n_pairs" for sampled field fits."""
        return next((k for k in SAMPLE_SIZE_KEYS if k in self.inputs), "n_paths")

    @property
    def sample_size(self):
        return self.inputs.get(self.sample_size_key)

    def to_dict(self) -> Dict[str, Any]:
        return _plain({
            "name": self.name,
            "digest": self.digest,
            "inputs": self.inputs,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "passed": self.passed,
            "gated": self.gated,
            "notes": self.notes,
            "tables": sorted(self.tables),
        })

    def log(self):
        mark = "✓" if self.passed else "✗"
        line = (f"{mark} {self.name}: {self.statistic} vs {self.threshold} "
                f"(seed={self.seed}, {self.sample_size_key}={self.sample_size})")
        if self.passed:
            logger.info(line)
        else:
            logger.warning(line)
        return self
