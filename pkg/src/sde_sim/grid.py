"""Uniform time grids."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be ≥ 1, got {self.n_steps}")
        if not self.t0 < self.T:
            raise ValueError(f"need t0 < T, got [{self.t0}, {self.T}]")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        nodes = self.t0 + self.dt * np.arange(self.n_steps + 1)
        nodes[-1] = self.T
        return nodes

    def step_of(self, times: np.ndarray) -> np.ndarray:
        """Index j with nodes[j] ≤ time < nodes[j+1] (times in [t0, T))."""
        idx = np.searchsorted(self.nodes, times, side="right") - 1
        return np.clip(idx, 0, self.n_steps - 1)

    def as_dict(self) -> dict:
        return {"t0": self.t0, "T": self.T, "n_steps": self.n_steps}
