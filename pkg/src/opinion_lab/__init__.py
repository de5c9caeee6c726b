"""Experiment harness for dsbm_opinion: configuration, cached lab interface and CLI"""

from loguru import logger as log

log.disable("opinion_lab")

from importlib_metadata import version

__version__ = version("dsbm-opinion-lab")

from .config import ExperimentConfig, dump_config, parse_config
from .harness import RunSummary, run
from .interface import OpinionLab

__all__ = (
    "ExperimentConfig",
    "OpinionLab",
    "RunSummary",
    "__version__",
    "dump_config",
    "parse_config",
    "run",
)
