"""Experiment runner."""
from src.cli.check_runners import CHECKS, RunContext
from src.cli.config import ExperimentConfig, load_config, parse_config
from src.cli.describe import describe
from src.cli.main import build_parser, main
from src.cli.pipeline import ExperimentPipeline, run_experiment

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "ExperimentPipeline",
    "run_experiment",
    "RunContext",
    "CHECKS",
    "describe",
    "build_parser",
    "main",
]
