"""Shared fixtures: small measures, zoo models and sample sizes that keep the suite quick."""
import pytest

from src.bsde.basis import RegressionBasis
from src.levy import finite_uniform, tempered_stable, zero
from src.model import build_model
from src.storage import ArtifactStore, RunRegistry
from src.verify import SolveSettings


@pytest.fixture
def stable():
    return tempered_stable(c=1.0, alpha=0.5, cutoff=1.0)


@pytest.fixture
def uniform():
    # mass 2 on 0.5 ≤ |e| ≤ 1
    return finite_uniform(mass=2.0, radius=1.0)


@pytest.fixture
def no_jumps():
    return zero()


@pytest.fixture
def linear_free():
    """linear_additive without jumps: X_T = x + bT + σW_T and u(t, x) = x + b(T - t)."""
    return build_model("linear_additive", zero())


@pytest.fixture
def linear_uniform(uniform):
    return build_model("linear_additive", uniform)


@pytest.fixture
def small():
    return SolveSettings(n_paths=2000, n_steps=10, truncation_k=4, seed=7,
                         basis=RegressionBasis(degree=2), oracle_nx=201, oracle_nt=200, abs_tol=2e-2)


@pytest.fixture
def store(tmp_path):
    return ArtifactStore(root=str(tmp_path / "out"), cache_dir=str(tmp_path / "cache"))


@pytest.fixture
def registry(tmp_path):
    return RunRegistry(db_path=str(tmp_path / "registry.db"))
