"""One-dimensional IPDE problems for the finite-difference oracle."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.model.assumptions import AssumptionReport, check_assumptions
from src.model.spec import ModelSpec
from src.operators.nonlocal_ops import taylor_radius
from src.operators.value_field import ValueField
from src.utils.errors import CflViolation, ConfigError

MAX_COMPONENTS = 2


@dataclass(frozen=True, eq=False)
class FdProblem:
    """spec on [t0, T] × [-L, L] with nx space nodes and nt time steps."""

    spec: ModelSpec
    L: float = 4.0
    nx: int = 401
    nt: int = 400
    t0: float = 0.0

    def __post_init__(self):
        dims = self.spec.dims
        if (dims.k, dims.d, dims.l) != (1, 1, 1) or dims.m > MAX_COMPONENTS:
            raise ConfigError(f"the finite-difference oracle needs k=d=l=1 and m ≤ {MAX_COMPONENTS}, got "
                              f"{dims.as_dict()}", key="oracle")
        if self.L <= 0 or self.nx < 5 or self.nt < 1:
            raise ConfigError(f"bad oracle grid L={self.L}, nx={self.nx}, nt={self.nt}", key="oracle")
        if not self.t0 < self.spec.T:
            raise ConfigError(f"oracle start {self.t0} is not before T={self.spec.T}", key="oracle.t0")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.nx)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.spec.T, self.nt + 1)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / (self.nx - 1)

    @property
    def dt(self) -> float:
        return (self.spec.T - self.t0) / self.nt

    def terminal_field(self) -> ValueField:
        g = self.spec.terminal(self.x[:, None]).T                     # (m, nx)
        return ValueField.from_values([self.spec.T], [self.x], g[:, None, :])

    def explicit_mass(self) -> float:
        """Λ_fd: λ-mass of the marks integrated by direct interpolation rather than the Taylor shell."""
        measure = self.spec.measure
        if measure.is_zero:
            return 0.0
        eps = taylor_radius(self.spec, self.terminal_field(), self.spec.T, self.x[:, None])
        return float(measure.mass(eps))

    def cfl_number(self, report: Optional[AssumptionReport] = None) -> float:
        report = report or check_assumptions(self.spec, box=([-self.L], [self.L]), n=400)
        return self.dt * (self.explicit_mass() + report.h_lipschitz)

    def check_cfl(self, report: Optional[AssumptionReport] = None) -> float:
        number = self.cfl_number(report)
        if number >= 1.0:
            raise CflViolation(f"Δt·(Λ_fd + C_h) = {number:.3f} ≥ 1; increase nt", cfl=number, nt=self.nt)
        return number
