"""Command-line entry point: ``run <config>`` and ``describe <name>``."""
import argparse
from typing import List, Optional

from src.cli.config import load_config
from src.cli.describe import describe
from src.cli.pipeline import ExperimentPipeline
from src.utils import logger
from src.utils.errors import JumpBsdeError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpbsde",
                                     description="Coupled BSDEs with jumps: run experiments and describe models.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="path to the YAML experiment config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--threads", type=int, default=None, help="worker processes for path simulation")
    run.add_argument("--out", default=None, help="output directory (overrides output_dir)")

    desc = sub.add_parser("describe", help="describe a registered model or measure")
    desc.add_argument("name")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "describe":
            print(describe(args.name))
            return 0
        config = load_config(args.config, seed=args.seed, threads=args.threads, out=args.out)
        return ExperimentPipeline(config).run()
    except JumpBsdeError as e:
        key = getattr(e, "key", None)
        logger.error(f"✗ {type(e).__name__}: {e}" + (f" [key: {key}]" if key else ""))
        return e.exit_code
