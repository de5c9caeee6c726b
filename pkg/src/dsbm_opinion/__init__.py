"""Opinion dynamics on directed stochastic block models and their mean-field limits"""

from loguru import logger as log

log.disable("dsbm_opinion")

from importlib_metadata import version

__version__ = version("dsbm-opinion-lab")

from .errors import (
    BoundsViolation,
    BudgetExceeded,
    DimensionMismatch,
    OpinionLabError,
    SpecError,
    UnknownFunction,
)
from .models import GraphSample, ModelSpec, ThetaRule
from .runner import Runner

__all__ = (
    "BoundsViolation",
    "BudgetExceeded",
    "DimensionMismatch",
    "GraphSample",
    "ModelSpec",
    "OpinionLabError",
    "Runner",
    "SpecError",
    "ThetaRule",
    "UnknownFunction",
    "__version__",
)
