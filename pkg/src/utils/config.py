"""Configuration management for the BSDE experiment runner."""
import os
from pathlib import Path
from typing import Optional
from pydantic_settings import BaseSettings
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    """Application settings."""

    # Storage Paths
    output_dir: str = os.getenv("OUTPUT_DIR", "./runs")
    cache_dir: str = os.getenv("CACHE_DIR", "./runs/cache")
    registry_path: str = os.getenv("REGISTRY_PATH", "./runs/registry.db")

    # Logging
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    log_file: str = os.getenv("LOG_FILE", "./logs/jumpbsde.log")

    # Execution
    default_seed: int = int(os.getenv("DEFAULT_SEED", "20240601"))
    n_threads: int = int(os.getenv("N_THREADS", "1"))
    path_chunk: int = int(os.getenv("PATH_CHUNK", "8192"))

    # Mark-space quadrature
    shell_points: int = int(os.getenv("SHELL_POINTS", "16"))
    shell_ratio: float = float(os.getenv("SHELL_RATIO", "2.0"))
    radial_floor: float = float(os.getenv("RADIAL_FLOOR", str(2.0 ** -40)))
    default_support_radius: float = float(os.getenv("DEFAULT_SUPPORT_RADIUS", "50"))
    quadrature_rtol: float = float(os.getenv("QUADRATURE_RTOL", "1e-6"))
    sampler_nodes: int = int(os.getenv("SAMPLER_NODES", "4096"))

    # Regression / backward solver
    max_condition: float = float(os.getenv("MAX_CONDITION", "1e10"))
    basis_path_ratio: int = int(os.getenv("BASIS_PATH_RATIO", "20"))
    implicit_max_passes: int = int(os.getenv("IMPLICIT_MAX_PASSES", "50"))
    implicit_tol: float = float(os.getenv("IMPLICIT_TOL", "1e-10"))
    picard_tol: float = float(os.getenv("PICARD_TOL", "1e-6"))
    picard_max_iter: int = int(os.getenv("PICARD_MAX_ITER", "30"))
    state_lattice_nodes: int = int(os.getenv("STATE_LATTICE_NODES", "129"))
    field_nodes: int = int(os.getenv("FIELD_NODES", "101"))
    martingale_bins: int = int(os.getenv("MARTINGALE_BINS", "6"))

    # Optional override for the CSV float format
    csv_float_format: Optional[str] = os.getenv("CSV_FLOAT_FORMAT", "%.12e")

    class Config:
        env_file = ".env"
        case_sensitive = False


def setup_directories(settings: Settings):
    """Create necessary directories."""
    Path(settings.output_dir).mkdir(parents=True, exist_ok=True)
    Path(settings.cache_dir).mkdir(parents=True, exist_ok=True)
    Path(settings.registry_path).parent.mkdir(parents=True, exist_ok=True)
    Path(settings.log_file).parent.mkdir(parents=True, exist_ok=True)


settings = Settings()
setup_directories(settings)
