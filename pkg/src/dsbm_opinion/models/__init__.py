"""Contains all the data models used in inputs/outputs"""

from .distributions import (
    Mixture,
    PointMass,
    ScalarDistribution,
    ScaledBeta,
    Uniform,
    VectorLaw,
    scalar_from_dict,
)
from .graph_sample import GraphSample, RowStochasticMatrix
from .mean_field import MeanFieldModel, MeanFieldTrajectory, RegimeStats
from .model_spec import ModelSpec
from .opinions import OpinionState, SignalFrame, TrajectoryRecord
from .reports import (
    ASEstimate,
    ChaosReport,
    ChaosRow,
    ConcentrationRow,
    ConcentrationTestCase,
    ErrorCurve,
    ErrorSeries,
    OneStepRow,
    RateFit,
    StationarityReport,
    StationarityRow,
    TreeLikenessRow,
)
from .theta_rule import ThetaRule
from .tree import GWTree, NeighborhoodDiagnostic

__all__ = (
    "ASEstimate",
    "ChaosReport",
    "ChaosRow",
    "ConcentrationRow",
    "ConcentrationTestCase",
    "ErrorCurve",
    "ErrorSeries",
    "GWTree",
    "GraphSample",
    "MeanFieldModel",
    "MeanFieldTrajectory",
    "Mixture",
    "ModelSpec",
    "NeighborhoodDiagnostic",
    "OneStepRow",
    "OpinionState",
    "PointMass",
    "RateFit",
    "RegimeStats",
    "RowStochasticMatrix",
    "ScalarDistribution",
    "ScaledBeta",
    "SignalFrame",
    "StationarityReport",
    "StationarityRow",
    "ThetaRule",
    "TrajectoryRecord",
    "TreeLikenessRow",
    "Uniform",
    "VectorLaw",
    "scalar_from_dict",
)
