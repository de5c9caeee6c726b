"""Command-line entry point: ``opinion-lab <command> --config FILE``"""

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from loguru import logger as log

from dsbm_opinion.errors import OpinionLabError, SpecError
from dsbm_opinion.runner import THREADS_ENV, threads_from_env

from . import __version__
from .config import EXPERIMENT_KINDS, ExperimentConfig, parse_config
from .harness import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
LOG_LEVELS = ("WARNING", "INFO", "DEBUG")
LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opinion-lab",
        description="Opinion dynamics on directed stochastic block models",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    for name in (*EXPERIMENT_KINDS, "validate"):
        summary = "check a configuration" if name == "validate" else f"run the {name} experiment"
        sub = commands.add_parser(name, help=summary)
        sub.add_argument("--config", required=True, type=Path, help="TOML or JSON configuration file")
        sub.add_argument("-v", "--verbose", action="count", default=0, help="more logging, repeatable")
        if name == "validate":
            continue
        sub.add_argument("--seed", type=int, help="override the configured seed")
        sub.add_argument("--out", help="override the output directory")
        sub.add_argument("--threads", type=int, help=f"worker threads (over {THREADS_ENV} and the configuration)")
    return parser


def configure_logging(verbosity: int) -> None:
    log.remove()
    log.add(sys.stderr, level=LOG_LEVELS[min(verbosity + 1, len(LOG_LEVELS) - 1)], format=LOG_FORMAT)
    log.enable("dsbm_opinion")
    log.enable("opinion_lab")


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = parse_config(args.config.read_text(encoding="utf-8"))
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "out", None) is not None:
        config = config.with_out(args.out)
    if getattr(args, "threads", None) is not None:
        config = config.with_threads(args.threads)
    elif args.command != "validate":
        config = config.with_threads(threads_from_env(config.threads))
    return config


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = load_config(args)
        if args.command == "validate":
            log.info(f"{args.config} is a valid {config.kind} configuration")
            print(f"{args.config}: ok")
            return EXIT_OK
        summary = run(config, args.command)
    except SpecError as exc:
        for path, reason in exc.violations:
            log.error(f"{path}: {reason}")
        return EXIT_CONFIG
    except (OpinionLabError, OSError) as exc:
        log.error(str(exc))
        return EXIT_RUNTIME

    for path in summary.paths():
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
