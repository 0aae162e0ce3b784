"""Experiment configuration: a YAML tree validated against a strict schema."""
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.bsde.basis import BasisFamily, RegressionBasis
from src.bsde.solution import QEstimator
from src.cli.check_runners import validate_check
from src.levy.measure import LevyMeasure
from src.levy.registry import build_measure
from src.model.spec import ModelSpec
from src.model.zoo import build_model
from src.utils.config import settings
from src.utils.errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NamedSection(_Strict):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


class GridSection(_Strict):
    t: float = 0.0
    x: List[float] = Field(default_factory=lambda: [0.0])
    x_ladder: Optional[List[float]] = None
    n_steps: int = Field(50, gt=0)
    n_paths: int = Field(20_000, gt=1)


class TruncationSection(_Strict):
    k: int = Field(16, ge=1)
    ks: Optional[List[int]] = None

    @model_validator(mode="after")
    def _ks_increasing(self):
        if self.ks is not None and (len(self.ks) < 2 or sorted(set(self.ks)) != list(self.ks)):
            raise ValueError("ks must be a strictly increasing list of at least two levels")
        return self


class BasisSection(_Strict):
    family: BasisFamily = BasisFamily.POLYNOMIAL
    degree: int = Field(3, ge=0)
    cells: int = Field(8, ge=1)

    def build(self) -> RegressionBasis:
        return RegressionBasis(self.family, self.degree, self.cells)


class PicardSection(_Strict):
    delta: Union[float, Literal["auto"]] = "auto"
    tol: float = Field(settings.picard_tol, gt=0)
    max_iter: int = Field(settings.picard_max_iter, ge=1)


class SolverSection(_Strict):
    method: Literal["lsmc", "picard"] = "lsmc"
    basis: BasisSection = Field(default_factory=BasisSection)
    estimator: QEstimator = QEstimator.REPRESENTATION
    picard: PicardSection = Field(default_factory=PicardSection)

    @model_validator(mode="after")
    def _no_frozen(self):
        if self.estimator is QEstimator.FROZEN:
            raise ValueError("the frozen estimator is driven by the uniqueness checks, not configured directly")
        return self


class OracleSection(_Strict):
    enabled: bool = True
    L: float = Field(4.0, gt=0)
    nx: int = Field(401, ge=5)
    nt: int = Field(400, ge=1)


class CheckEntry(_Strict):
    name: str
    gated: bool = True
    options: Dict[str, Any] = Field(default_factory=dict)


class ExperimentConfig(_Strict):
    name: str
    seed: int = settings.default_seed
    threads: int = Field(settings.n_threads, ge=1)
    output_dir: str = settings.output_dir
    model: NamedSection
    measure: NamedSection = Field(default_factory=lambda: NamedSection(name="tempered_stable"))
    grid: GridSection = Field(default_factory=GridSection)
    truncation: TruncationSection = Field(default_factory=TruncationSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    checks: List[Union[str, CheckEntry]] = Field(default_factory=list)
    abs_tol: float = Field(1e-2, ge=0)

    def check_entries(self) -> List[CheckEntry]:
        return [CheckEntry(name=c) if isinstance(c, str) else c for c in self.checks]

    def build_measure(self) -> LevyMeasure:
        return build_measure(self.measure.name, **self.measure.params)

    def build_model(self) -> ModelSpec:
        return build_model(self.model.name, self.build_measure(), **self.model.params)

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def section(self, *names: str) -> Dict[str, Any]:
        """Sub-tree used as a cache key; always carries the model and measure."""
        dump = self.echo()
        out = {"model": dump["model"], "measure": dump["measure"]}
        out.update({n: dump[n] for n in names})
        return out


def _dotted(loc) -> str:
    return ".".join(str(part) for part in loc)


def parse_config(raw: Dict[str, Any], seed: Optional[int] = None, threads: Optional[int] = None,
                 out: Optional[str] = None) -> ExperimentConfig:
    """Validate a parsed YAML tree, apply flag overrides and check the registered names."""
    if not isinstance(raw, dict):
        raise ConfigError("the config must be a mapping at the top level", key="<root>")
    raw = dict(raw)
    for key, value in (("seed", seed), ("threads", threads), ("output_dir", out)):
        if value is not None:
            raw[key] = value
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = _dotted(first["loc"]) or "<root>"
        raise ConfigError(f"{key}: {first['msg']}", key=key) from None

    # names and parameter keys against the registries
    config.build_model()
    for index, entry in enumerate(config.check_entries()):
        validate_check(index, entry.name, entry.options)
    return config


def load_config(path: Union[str, Path], seed: Optional[int] = None, threads: Optional[int] = None,
                out: Optional[str] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist", key="<path>")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}", key="<root>") from None
    return parse_config(raw or {}, seed=seed, threads=threads, out=out)
