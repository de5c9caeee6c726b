from collections.abc import Iterable
from functools import cache, partial
from typing import Any

import numpy as np
import pandas as pd
from attrs import define, field
from loguru import logger as log
from merge_args import merge_args

from dsbm_opinion import dynamics, graph, gwtree, meanfield, metrics
from dsbm_opinion.errors import SpecError
from dsbm_opinion.models import (
    ASEstimate,
    ErrorCurve,
    GraphSample,
    MeanFieldModel,
    ModelSpec,
    RowStochasticMatrix,
    TrajectoryRecord,
)
from dsbm_opinion.models.reports import A_S_COLUMNS, CONCENTRATION_COLUMNS, ONE_STEP_COLUMNS, RATE_FIT_COLUMNS
from dsbm_opinion.runner import Runner
from dsbm_opinion.types import IntArray

from .config import ExperimentConfig

TRAJECTORY_VERTICES = 10


def tabular(func=None, columns=None):
    """Let a method return a pandas table unless called with ``as_pandas=False``

    Results exposing ``to_frame`` are converted with it; other results are treated as
    records with ``to_dict``. A single record becomes a ``pd.Series``.
    """
    if func is None:
        return partial(tabular, columns=columns)

    @merge_args(func)
    def wrapper(*args, as_pandas=True, **kwargs):
        result = func(*args, **kwargs)

        if not as_pandas:
            log.debug("Returning plain result")
            return result

        if hasattr(result, "to_frame"):
            return result.to_frame()

        return_first_item = False
        if not isinstance(result, Iterable):
            return_first_item = True
            result = [result]

        table = pd.DataFrame(
            [d.to_dict() if hasattr(d, "to_dict") else d for d in result],
            columns=columns,
        )
        if return_first_item:
            log.debug("Returning as Series")
            return table.iloc[0]
        return table

    return wrapper


@define(auto_attribs=True, eq=False)
class OpinionLab:
    """
    Main entry point for running the experiments of one configuration

    Every expensive quantity is cached per argument tuple, so the harness and
    interactive sessions can ask for the same graph or curve repeatedly.
    """

    config: ExperimentConfig
    runner: Runner | None = field(default=None)

    def __attrs_post_init__(self):
        if self.runner is None:
            self.runner = Runner(self.config.seed, threads=self.config.threads)

    @property
    def spec(self) -> ModelSpec:
        return self.config.model

    @property
    def seed(self) -> int:
        return self.config.seed

    def theta(self, n: int) -> float:
        """Density parameter of the configured rule at ``n``"""
        return float(self.config.theta_rule(n))

    @cache
    def labels(self, n: int, outer: int = 0) -> IntArray:
        return graph.sample_labels(self.spec, n, self.seed, outer=outer)

    @cache
    def graph(self, n: int, outer: int = 0, inner: int = 0) -> GraphSample:
        return graph.sample_graph(
            self.spec,
            self.labels(n, outer),
            self.theta(n),
            self.seed,
            outer=outer,
            inner=inner,
        )

    @cache
    def influence(self, n: int, outer: int = 0, inner: int = 0) -> RowStochasticMatrix:
        return graph.normalize_weights(self.graph(n, outer, inner))

    @cache
    def model(self, n: int, outer: int = 0) -> MeanFieldModel:
        return meanfield.build_model(self.spec, n, self.theta(n), labels=self.labels(n, outer))

    @cache
    @tabular
    def regime(self, n: int, outer: int = 0):
        """Regime statistics of the (n, theta(n)) point"""
        return self.model(n, outer).regime

    @cache
    def k_max(self) -> int:
        if self.config.k_max is not None:
            return self.config.k_max
        return metrics.contraction_horizon(self.spec.d)

    @cache
    def k_long(self) -> int:
        if self.config.k_long is not None:
            return self.config.k_long
        return metrics.contraction_horizon(self.spec.d, self.config.tol)

    @cache
    def trajectories(self, n: int) -> list[TrajectoryRecord]:
        """Recorded trajectories of the first vertices over ``inner`` replications"""
        vertices = np.arange(min(n, TRAJECTORY_VERTICES))
        records = []
        for j in range(self.config.inner):
            result = dynamics.simulate(
                self.spec,
                self.graph(n, 0, j),
                self.k_max(),
                self.seed,
                record=vertices,
                inner=j,
            )
            records.append(result.trajectory)
        return records

    @cache
    @tabular
    def error_curve(self):
        """Error estimates per (n, theta, k, norm type)"""
        return self._curve()

    @cache
    def _curve(self) -> ErrorCurve:
        return metrics.error_experiment(
            self.spec,
            list(self.config.n_grid),
            self.config.theta_rule,
            self.config.k_max,
            self.config.inner,
            self.seed,
            outer=self.config.outer,
            intermediate=self.config.intermediate,
            runner=self.runner,
        )

    def error_sup(self) -> pd.DataFrame:
        """Sup-over-k summary of :meth:`error_curve`"""
        return self._curve().sup_frame()

    @cache
    @tabular(columns=RATE_FIT_COLUMNS)
    def rate_fits(self):
        """Fitted decay of the sup-k error for every measured norm"""
        curve = self._curve()
        fits = []
        for norm_type in curve.norm_types:
            try:
                fits.append(metrics.fit_rate(curve, norm_type))
            except SpecError as exc:
                log.warning(f"No rate fit for {norm_type}: {exc}")
        return fits

    @cache
    @tabular(columns=ONE_STEP_COLUMNS)
    def one_step(self, n: int):
        return metrics.one_step_concentration(
            self.spec,
            n,
            self.config.inner,
            self.seed,
            theta=self.theta(n),
            runner=self.runner,
        )

    @cache
    @tabular
    def chaos(self, n: int):
        settings = self.config.chaos
        return metrics.chaos_experiment(
            self.spec,
            n,
            settings.k,
            settings.vertex_sets,
            settings.functions,
            self.config.inner,
            self.seed,
            theta=self.theta(n),
            outer=self.config.outer,
            limit_replications=settings.limit_replications,
            runner=self.runner,
        )

    @cache
    @tabular
    def stationarity(self, n: int):
        return metrics.stationarity_experiment(
            self.spec,
            n,
            self.k_long(),
            self.config.inner,
            self.config.tol,
            self.seed,
            theta=self.theta(n),
            runner=self.runner,
        )

    @cache
    @tabular(columns=CONCENTRATION_COLUMNS)
    def concentration(self):
        if self.config.concentration is None:
            raise SpecError.single("concentration", "no random-sum setup configured")
        return metrics.concentration_check(
            self.config.concentration,
            self.config.concentration_reps,
            self.seed,
            runner=self.runner,
        )

    @cache
    @tabular(columns=A_S_COLUMNS)
    def a_s(self):
        """Branching-tree estimates of a_s over the configured theta grid"""
        return self._a_s()

    @cache
    def _a_s(self) -> list[ASEstimate]:
        settings = self.config.tree
        return metrics.tree_experiment(
            self.spec,
            settings.thetas,
            settings.s_values,
            self.config.inner,
            self.seed,
            runner=self.runner,
            budget=settings.budget,
        )

    @cache
    @tabular(columns=RATE_FIT_COLUMNS)
    def a_s_slopes(self):
        rows = self._a_s()
        fits = []
        for r in sorted({row.root_type for row in rows}):
            for s in self.config.tree.s_values:
                try:
                    fits.append(metrics.fit_tree_slope(rows, s, r))
                except SpecError as exc:
                    log.warning(f"No slope fit for a_{s}({r}): {exc}")
        return fits

    @cache
    @tabular
    def tree_likeness(self, n: int):
        settings = self.config.tree
        vertices = np.arange(min(n, settings.vertex_count))
        return gwtree.tree_likeness(self.graph(n), settings.depth, vertices)

    def model_report(self, n: int) -> dict[str, Any]:
        return meanfield.model_report(self.model(n))


__all__ = ["OpinionLab", "tabular"]
