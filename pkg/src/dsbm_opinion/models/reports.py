"""Result records of the experiments.

Every row type exposes ``to_dict`` with exactly the columns written to its CSV file,
so a list of rows turns into a table with ``pd.DataFrame([row.to_dict() for ...])``.
"""

from typing import Any, Literal

import numpy as np
import pandas as pd
from attrs import define, field

from ..errors import SpecError
from ..types import UNSET, Estimate, FloatArray, Unset, combined_stderr
from .distributions import ScalarDistribution, scalar_from_dict

NormType = Literal["inf", "row_l1", "inf_intermediate", "row_l1_intermediate"]

ERROR_CURVE_COLUMNS = ["n", "theta", "k", "norm_type", "estimate", "stderr", "reps", "dense_ok"]
ERROR_SUP_COLUMNS = ["n", "theta", "norm_type", "k_at", "estimate", "stderr", "reps", "dense_ok", "truncated"]
RATE_FIT_COLUMNS = ["norm_type", "slope", "intercept", "r2", "points"]
CHAOS_COLUMNS = [
    "n", "k", "statistic", "vertices", "communities", "functions",
    "graph_estimate", "graph_stderr", "limit_estimate", "limit_stderr",
    "gap", "gap_stderr", "reps",
]  # fmt: skip
STATIONARITY_COLUMNS = [
    "n", "community", "moment", "topic", "empirical", "empirical_stderr",
    "stationary", "stationary_stderr", "gap", "gap_stderr", "reps",
]  # fmt: skip
CONCENTRATION_COLUMNS = [
    "statistic", "eps", "empirical", "stderr", "bound", "informative", "passed", "reps", "mu", "nu",
]  # fmt: skip
TREE_COLUMNS = ["n", "theta", "depth", "vertex_count_checked", "non_tree_fraction"]
A_S_COLUMNS = ["theta", "root_type", "s", "estimate", "stderr", "reps", "bound"]
ONE_STEP_COLUMNS = ["n", "theta", "statistic", "estimate", "stderr", "reps", "rate"]


def _optional(value: Unset | bool | float) -> Any:
    return None if isinstance(value, Unset) else value


@define(frozen=True, eq=False)
class ErrorSeries:
    """Error estimates of one (n, theta, norm) point

    Each outer label draw contributes a label-conditional estimate per time step,
    computed from ``reps`` inner replications.

    Attributes:
        n (int): vertex count
        theta (float): density parameter
        norm_type (NormType): which distance was measured
        estimates (FloatArray): (outer, k_max + 1) conditional estimates
        stderrs (FloatArray): (outer, k_max + 1) their standard errors
        reps (int): inner replications per outer draw
        dense_ok (Unset | bool): whether the dense-threshold hypothesis holds
        clipping_active (bool): whether edge probabilities were clipped at 1
    """

    n: int
    theta: float
    norm_type: NormType
    estimates: FloatArray
    stderrs: FloatArray
    reps: int
    dense_ok: Unset | bool = UNSET
    clipping_active: bool = False

    @property
    def outer(self) -> int:
        return int(self.estimates.shape[0])

    @property
    def k_max(self) -> int:
        return int(self.estimates.shape[1]) - 1

    def at(self, k: int) -> Estimate:
        """Average over the outer draws at time ``k``"""
        return Estimate(
            value=float(self.estimates[:, k].mean()),
            stderr=combined_stderr(*self.stderrs[:, k]) / self.outer,
            reps=self.reps * self.outer,
        )

    def outer_sup(self) -> FloatArray:
        """Per outer draw, max over k of the conditional estimate"""
        return self.estimates.max(axis=1)

    def sup(self) -> tuple[int, Estimate]:
        """Max over k, taken per outer draw and then averaged; with the k attaining it on average"""
        at = self.estimates.argmax(axis=1)
        rows = np.arange(self.outer)
        k_at = int(self.estimates.mean(axis=0).argmax())
        return k_at, Estimate(
            value=float(self.estimates[rows, at].mean()),
            stderr=combined_stderr(*self.stderrs[rows, at]) / self.outer,
            reps=self.reps * self.outer,
        )

    def rows(self) -> list[dict[str, Any]]:
        out = []
        for k in range(self.k_max + 1):
            est = self.at(k)
            out.append(
                {
                    "n": self.n,
                    "theta": self.theta,
                    "k": k,
                    "norm_type": self.norm_type,
                    "estimate": est.value,
                    "stderr": est.stderr,
                    "reps": est.reps,
                    "dense_ok": _optional(self.dense_ok),
                },
            )
        return out


@define(eq=False)
class ErrorCurve:
    """
    Attributes:
        series (list[ErrorSeries]): one entry per (n, theta, norm type)
        k_max (int): last time step measured
        truncated (bool): whether (1 - d)^k_max is above the requested contraction level
    """

    series: list[ErrorSeries] = field(factory=list)
    k_max: int = 0
    truncated: bool = False

    def select(self, norm_type: NormType) -> list[ErrorSeries]:
        return sorted(
            (s for s in self.series if s.norm_type == norm_type),
            key=lambda s: s.n,
        )

    def get(self, n: int, norm_type: NormType) -> ErrorSeries:
        for s in self.series:
            if s.n == n and s.norm_type == norm_type:
                return s
        raise KeyError((n, norm_type))

    @property
    def norm_types(self) -> list[NormType]:
        return list(dict.fromkeys(s.norm_type for s in self.series))

    def to_frame(self) -> pd.DataFrame:
        rows = [row for s in self.series for row in s.rows()]
        return pd.DataFrame(rows, columns=ERROR_CURVE_COLUMNS)

    def sup_frame(self) -> pd.DataFrame:
        rows = []
        for s in self.series:
            k_at, est = s.sup()
            rows.append(
                {
                    "n": s.n,
                    "theta": s.theta,
                    "norm_type": s.norm_type,
                    "k_at": k_at,
                    "estimate": est.value,
                    "stderr": est.stderr,
                    "reps": est.reps,
                    "dense_ok": _optional(s.dense_ok),
                    "truncated": self.truncated,
                },
            )
        return pd.DataFrame(rows, columns=ERROR_SUP_COLUMNS)


@define(frozen=True)
class RateFit:
    """Least-squares fit of log(sup-k error) on log sqrt(log n / theta)

    Attributes:
        norm_type (NormType): fitted norm
        slope (float): fitted exponent
        intercept (float): log of the empirical constant
        r2 (float): coefficient of determination
        points (int): number of (n, theta) points used
    """

    norm_type: str
    slope: float
    intercept: float
    r2: float
    points: int

    @property
    def constant(self) -> float:
        return float(np.exp(self.intercept))

    def to_dict(self) -> dict[str, Any]:
        return {
            "norm_type": self.norm_type,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "points": self.points,
        }


@define(frozen=True, eq=False)
class ChaosRow:
    """One factorization or empirical-measure comparison

    ``statistic`` is ``product`` for the joint moment of a vertex set against the
    product of limit moments, and ``empirical`` for the community-restricted empirical
    average against its limit.
    """

    n: int
    k: int
    statistic: Literal["product", "empirical"]
    vertices: tuple[int, ...]
    communities: tuple[int, ...]
    functions: tuple[str, ...]
    graph: Estimate
    limit: Estimate

    @property
    def gap(self) -> float:
        return self.graph.value - self.limit.value

    @property
    def gap_stderr(self) -> float:
        return combined_stderr(self.graph.stderr, self.limit.stderr)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "statistic": self.statistic,
            "vertices": " ".join(map(str, self.vertices)),
            "communities": " ".join(map(str, self.communities)),
            "functions": " ".join(self.functions),
            "graph_estimate": self.graph.value,
            "graph_stderr": self.graph.stderr,
            "limit_estimate": self.limit.value,
            "limit_stderr": self.limit.stderr,
            "gap": self.gap,
            "gap_stderr": self.gap_stderr,
            "reps": self.graph.reps,
        }


@define(eq=False)
class ChaosReport:
    rows: list[ChaosRow] = field(factory=list)

    def select(self, statistic: str, n: int | None = None) -> list[ChaosRow]:
        return [r for r in self.rows if r.statistic == statistic and (n is None or r.n == n)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=CHAOS_COLUMNS)


@define(frozen=True, eq=False)
class StationarityRow:
    n: int
    community: int
    moment: Literal["mean", "second"]
    topic: int
    empirical: Estimate
    stationary: Estimate

    @property
    def gap(self) -> float:
        return abs(self.empirical.value - self.stationary.value)

    @property
    def gap_stderr(self) -> float:
        return combined_stderr(self.empirical.stderr, self.stationary.stderr)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "community": self.community,
            "moment": self.moment,
            "topic": self.topic,
            "empirical": self.empirical.value,
            "empirical_stderr": self.empirical.stderr,
            "stationary": self.stationary.value,
            "stationary_stderr": self.stationary.stderr,
            "gap": self.gap,
            "gap_stderr": self.gap_stderr,
            "reps": self.empirical.reps,
        }


@define(eq=False)
class StationarityReport:
    """
    Attributes:
        rows (list[StationarityRow]): one per (community, moment, topic)
        k_long (int): burn-in length of the graph runs
        horizon (int): truncation horizon of the stationary samples
    """

    rows: list[StationarityRow] = field(factory=list)
    k_long: int = 0
    horizon: int = 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=STATIONARITY_COLUMNS)


@define(frozen=True)
class ConcentrationTestCase:
    """Random-sum setup of the concentration checks

    N_r is Poisson with mean ``N_means[r]`` or Binomial(``N_trials[r]``, ``N_means[r] /
    N_trials[r]``); the summands are i.i.d. copies of B (weight law) and X B.

    Attributes:
        N_means (tuple[float, ...]): E[N_r], one per type
        weight_dist (ScalarDistribution): law of B on [0, H]
        x_dist (ScalarDistribution): law of X on [-1, 1]
        H (float): weight cap
        eps (tuple[float, ...]): deviation levels
        N_law (str): ``poisson`` or ``binomial``
        N_trials (tuple[int, ...] | None): binomial trial counts
    """

    N_means: tuple[float, ...] = field(converter=lambda v: tuple(float(x) for x in v))
    weight_dist: ScalarDistribution
    x_dist: ScalarDistribution
    H: float = 1.0
    eps: tuple[float, ...] = field(
        default=(0.05, 0.1, 0.2, 0.3, 0.5),
        converter=lambda v: tuple(float(x) for x in v),
    )
    N_law: str = "poisson"
    N_trials: tuple[int, ...] | None = None

    @property
    def K(self) -> int:
        return len(self.N_means)

    @property
    def mu(self) -> float:
        return float(sum(self.N_means) * self.weight_dist.mean())

    @property
    def nu(self) -> float:
        return float(sum(self.N_means) * self.weight_dist.second_moment())

    def to_dict(self) -> dict[str, Any]:
        field_dict: dict[str, Any] = {
            "N_means": list(self.N_means),
            "weight": self.weight_dist.to_dict(),
            "x": self.x_dist.to_dict(),
            "H": self.H,
            "eps": list(self.eps),
            "N_law": self.N_law,
        }
        if self.N_trials is not None:
            field_dict["N_trials"] = list(self.N_trials)
        return field_dict

    @classmethod
    def from_dict(cls, src_dict: dict[str, Any], path: str = "") -> "ConcentrationTestCase":
        prefix = f"{path}." if path else ""
        d = src_dict.copy()
        violations: list[tuple[str, str]] = []

        def law(key: str) -> ScalarDistribution | None:
            try:
                return scalar_from_dict(d.pop(key), f"{prefix}{key}")
            except KeyError:
                violations.append((f"{prefix}{key}", "missing required setting"))
            except SpecError as exc:
                violations.extend(exc.violations)
            return None

        weight, x = law("weight"), law("x")
        try:
            N_means = [float(m) for m in d.pop("N_means")]
            if not N_means:
                violations.append((f"{prefix}N_means", "at least one type is needed"))
        except KeyError:
            violations.append((f"{prefix}N_means", "missing required setting"))
        except (TypeError, ValueError) as exc:
            violations.append((f"{prefix}N_means", f"bad value ({exc})"))
        trials = d.pop("N_trials", None)
        if violations:
            raise SpecError(violations)

        return cls(
            N_means=N_means,
            weight_dist=weight,  # type: ignore[arg-type]
            x_dist=x,  # type: ignore[arg-type]
            H=float(d.pop("H", 1.0)),
            eps=d.pop("eps", (0.05, 0.1, 0.2, 0.3, 0.5)),
            N_law=str(d.pop("N_law", "poisson")),
            N_trials=None if trials is None else tuple(int(t) for t in trials),
        )


@define(frozen=True)
class ConcentrationRow:
    """Empirical tail against the analytic bound at one deviation level

    ``statistic`` is ``ratio`` (ratio of random sums) or ``sum`` (one-sided sum tail).
    """

    statistic: Literal["ratio", "sum"]
    eps: float
    empirical: float
    stderr: float
    bound: float
    reps: int
    mu: float
    nu: float

    @property
    def informative(self) -> bool:
        return self.bound <= 1.0

    @property
    def passed(self) -> bool:
        if not self.informative:
            return True
        return self.empirical <= self.bound + 3 * self.stderr

    def to_dict(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "eps": self.eps,
            "empirical": self.empirical,
            "stderr": self.stderr,
            "bound": self.bound,
            "informative": self.informative,
            "passed": self.passed,
            "reps": self.reps,
            "mu": self.mu,
            "nu": self.nu,
        }


@define(frozen=True)
class TreeLikenessRow:
    n: int
    theta: float
    depth: int
    vertex_count_checked: int
    non_tree_fraction: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "theta": self.theta,
            "depth": self.depth,
            "vertex_count_checked": self.vertex_count_checked,
            "non_tree_fraction": self.non_tree_fraction,
        }


@define(frozen=True)
class ASEstimate:
    """Monte Carlo estimate of a_s(r), with the explicit bound when s = 1"""

    theta: float
    root_type: int
    s: int
    estimate: Estimate
    bound: Unset | float = UNSET

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta": self.theta,
            "root_type": self.root_type,
            "s": self.s,
            "estimate": self.estimate.value,
            "stderr": self.estimate.stderr,
            "reps": self.estimate.reps,
            "bound": _optional(self.bound),
        }


@define(frozen=True)
class OneStepRow:
    """Concentration of C X around the averaged operator at one (n, theta) point"""

    n: int
    theta: float
    statistic: Literal["CX", "C_minus_M"]
    estimate: Estimate
    rate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "theta": self.theta,
            "statistic": self.statistic,
            "estimate": self.estimate.value,
            "stderr": self.estimate.stderr,
            "reps": self.estimate.reps,
            "rate": self.rate,
        }


__all__ = [
    "A_S_COLUMNS",
    "CHAOS_COLUMNS",
    "CONCENTRATION_COLUMNS",
    "ERROR_CURVE_COLUMNS",
    "ERROR_SUP_COLUMNS",
    "ONE_STEP_COLUMNS",
    "RATE_FIT_COLUMNS",
    "STATIONARITY_COLUMNS",
    "TREE_COLUMNS",
    "ASEstimate",
    "ChaosReport",
    "ChaosRow",
    "ConcentrationRow",
    "ConcentrationTestCase",
    "ErrorCurve",
    "ErrorSeries",
    "NormType",
    "OneStepRow",
    "RateFit",
    "StationarityReport",
    "StationarityRow",
    "TreeLikenessRow",
]
