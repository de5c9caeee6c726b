"""Experiment configuration: parsing, validation and canonical serialization.

A configuration is a TOML document (JSON is accepted too, detected by a leading
``{``) with top-level run settings and one table per concern::

    seed = 7
    out = "results/dense"
    threads = 4

    [model]
    K = 2
    pi = [0.5, 0.5]
    kappa = [[1.0, 0.5], [0.5, 1.0]]
    c = 0.5
    d = 0.3

    [experiment]
    kind = "error"
    n_grid = [250, 500, 1000, 2000]
    theta_rule = "pow:0.8"
    inner = 20
    outer = 3
"""

import json
import sys
from collections.abc import Callable
from typing import Any, Literal, TypeVar

from attrs import define, evolve, field

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from dsbm_opinion.errors import SpecError
from dsbm_opinion.models import ConcentrationTestCase, ModelSpec, ThetaRule

T = TypeVar("T")

ExperimentKind = Literal["simulate", "meanfield", "error", "chaos", "stationary", "concentration", "tree"]
EXPERIMENT_KINDS: tuple[str, ...] = ("simulate", "meanfield", "error", "chaos", "stationary", "concentration", "tree")


def _collector(prefix: str, violations: list[tuple[str, str]]) -> Callable[..., Any]:
    def attempt(key: str, fn: Callable[[], T], default: T | None = None) -> T | None:
        try:
            return fn()
        except SpecError as exc:
            violations.extend(exc.violations)
        except KeyError:
            violations.append((f"{prefix}.{key}", "missing required setting"))
        except (TypeError, ValueError) as exc:
            violations.append((f"{prefix}.{key}", f"bad value ({exc})"))
        return default

    return attempt


def _int_list(raw: Any) -> tuple[int, ...]:
    if not isinstance(raw, list | tuple):
        raise TypeError(f"expected a list, got {type(raw).__name__}")
    return tuple(int(x) for x in raw)


@define(frozen=True)
class ChaosSettings:
    """
    Attributes:
        k (int): time at which the trajectories are compared
        vertex_sets (tuple[tuple[int, ...], ...]): community indices of each vertex set
        functions (tuple[tuple[str, ...], ...]): test function ids, aligned with vertex_sets
        limit_replications (int | None): Monte Carlo size of the limit side
    """

    k: int = 1
    vertex_sets: tuple[tuple[int, ...], ...] = ((0,),)
    functions: tuple[tuple[str, ...], ...] = (("proj:0",),)
    limit_replications: int | None = None

    def to_dict(self) -> dict[str, Any]:
        field_dict: dict[str, Any] = {
            "k": self.k,
            "vertex_sets": [list(s) for s in self.vertex_sets],
            "functions": [list(f) for f in self.functions],
        }
        if self.limit_replications is not None:
            field_dict["limit_replications"] = self.limit_replications
        return field_dict

    @classmethod
    def from_dict(cls, src_dict: dict[str, Any], path: str = "chaos") -> "ChaosSettings":
        d = src_dict.copy()
        violations: list[tuple[str, str]] = []
        attempt = _collector(path, violations)
        k = attempt("k", lambda: int(d.pop("k", 1)), 1)
        vertex_sets = attempt("vertex_sets", lambda: tuple(_int_list(s) for s in d.pop("vertex_sets", [[0]])), ())
        functions = attempt(
            "functions",
            lambda: tuple(tuple(str(f) for f in fs) for fs in d.pop("functions", [["proj:0"]])),
            (),
        )
        limit = attempt("limit_replications", lambda: d.pop("limit_replications", None))
        if len(vertex_sets) != len(functions) or any(len(v) != len(f) for v, f in zip(vertex_sets, functions)):
            violations.append((f"{path}.functions", "expected one function id per vertex of every set"))
        if k < 0:
            violations.append((f"{path}.k", f"time must be >= 0, got {k}"))
        if violations:
            raise SpecError(violations)
        return cls(
            k=k,
            vertex_sets=vertex_sets,
            functions=functions,
            limit_replications=None if limit is None else int(limit),
        )


@define(frozen=True)
class TreeSettings:
    """
    Attributes:
        thetas (tuple[float, ...]): density grid of the branching-tree scaling runs
        s_values (tuple[int, ...]): generations estimated
        depth (int): depth of the graph-side tree-likeness check
        vertex_count (int): vertices explored per graph
        budget (float): node budget of one tree
    """

    thetas: tuple[float, ...] = (8.0, 16.0, 32.0, 64.0)
    s_values: tuple[int, ...] = (1, 2, 3)
    depth: int = 3
    vertex_count: int = 200
    budget: float = 1e6

    def to_dict(self) -> dict[str, Any]:
        return {
            "thetas": list(self.thetas),
            "s_values": list(self.s_values),
            "depth": self.depth,
            "vertex_count": self.vertex_count,
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, src_dict: dict[str, Any], path: str = "tree") -> "TreeSettings":
        d = src_dict.copy()
        violations: list[tuple[str, str]] = []
        attempt = _collector(path, violations)
        thetas = attempt("thetas", lambda: tuple(float(t) for t in d.pop("thetas", cls().thetas)), ())
        s_values = attempt("s_values", lambda: _int_list(d.pop("s_values", list(cls().s_values))), ())
        depth = attempt("depth", lambda: int(d.pop("depth", 3)), 3)
        vertex_count = attempt("vertex_count", lambda: int(d.pop("vertex_count", 200)), 200)
        budget = attempt("budget", lambda: float(d.pop("budget", 1e6)), 1e6)
        if any(not t > 0 for t in thetas):
            violations.append((f"{path}.thetas", "every theta must be positive"))
        if any(s < 1 for s in s_values):
            violations.append((f"{path}.s_values", "generations start at 1"))
        if depth < 0:
            violations.append((f"{path}.depth", f"depth must be >= 0, got {depth}"))
        if violations:
            raise SpecError(violations)
        return cls(thetas=thetas, s_values=s_values, depth=depth, vertex_count=vertex_count, budget=budget)


@define(frozen=True)
class ExperimentConfig:
    """A validated experiment configuration

    Attributes:
        model (ModelSpec): the population model
        kind (ExperimentKind): experiment run by ``run``
        n_grid (tuple[int, ...]): vertex counts
        theta_rule (ThetaRule): density parameter as a function of n
        k_max (int | None): time horizon of error curves, from the contraction bound when None
        tol (float): burn-in and truncation tolerance of the stationarity runs
        k_long (int | None): burn-in length, from ``tol`` when None
        inner (int): replications within one label draw
        outer (int): label draws
        seed (int): root seed
        out (str): output directory
        threads (int): worker count
        intermediate (bool): also measure the distance to the intermediate process
        chaos (ChaosSettings): chaos experiment settings
        concentration (ConcentrationTestCase | None): random-sum setup
        concentration_reps (int): replications of the concentration check
        tree (TreeSettings): tree experiment settings
    """

    model: ModelSpec
    kind: ExperimentKind = "error"
    n_grid: tuple[int, ...] = (200,)
    theta_rule: ThetaRule = field(factory=lambda: ThetaRule("log", 2.0))
    k_max: int | None = None
    tol: float = 1e-4
    k_long: int | None = None
    inner: int = 20
    outer: int = 5
    seed: int = 0
    out: str = "results"
    threads: int = 1
    intermediate: bool = False
    chaos: ChaosSettings = field(factory=ChaosSettings)
    concentration: ConcentrationTestCase | None = None
    concentration_reps: int = 100_000
    tree: TreeSettings = field(factory=TreeSettings)
    additional_properties: dict[str, Any] = field(factory=dict, kw_only=True, eq=False)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return evolve(self, seed=int(seed))

    def with_out(self, out: str) -> "ExperimentConfig":
        return evolve(self, out=str(out))

    def with_threads(self, threads: int) -> "ExperimentConfig":
        return evolve(self, threads=int(threads))

    def to_dict(self) -> dict[str, Any]:
        experiment: dict[str, Any] = {
            "kind": self.kind,
            "n_grid": list(self.n_grid),
            "theta_rule": str(self.theta_rule),
            "tol": self.tol,
            "inner": self.inner,
            "outer": self.outer,
            "intermediate": self.intermediate,
        }
        if self.k_max is not None:
            experiment["k_max"] = self.k_max
        if self.k_long is not None:
            experiment["k_long"] = self.k_long

        field_dict: dict[str, Any] = {}
        field_dict.update(self.additional_properties)
        field_dict.update(
            {
                "seed": self.seed,
                "out": self.out,
                "threads": self.threads,
                "model": self.model.to_dict(),
                "experiment": experiment,
                "chaos": self.chaos.to_dict(),
                "tree": self.tree.to_dict(),
            },
        )
        if self.concentration is not None:
            field_dict["concentration"] = {
                **self.concentration.to_dict(),
                "replications": self.concentration_reps,
            }
        return field_dict

    @classmethod
    def from_dict(cls, src_dict: dict[str, Any]) -> "ExperimentConfig":
        """Validate a configuration tree, reporting every violation with its key path"""
        d = src_dict.copy()
        violations: list[tuple[str, str]] = []
        attempt = _collector("experiment", violations)
        top = _collector("config", violations)

        model = top("model", lambda: ModelSpec.from_dict(d.pop("model"), path="model"))
        experiment = dict(d.pop("experiment", {}))
        kind = experiment.pop("kind", "error")
        if kind not in EXPERIMENT_KINDS:
            violations.append(("experiment.kind", f"expected one of {', '.join(EXPERIMENT_KINDS)}, got {kind!r}"))

        n_grid = attempt("n_grid", lambda: _int_list(experiment.pop("n_grid", [200])), ())
        if not n_grid:
            violations.append(("experiment.n_grid", "at least one n is needed"))
        elif any(n < 2 for n in n_grid):
            violations.append(("experiment.n_grid", "every n must be at least 2"))
        theta_rule = attempt(
            "theta_rule",
            lambda: ThetaRule.parse(experiment.pop("theta_rule", "log:2"), "experiment.theta_rule"),
        )
        if theta_rule is not None and n_grid:
            violations.extend(theta_rule.violations(list(n_grid), "experiment.theta_rule"))

        k_max = attempt("k_max", lambda: experiment.pop("k_max", None))
        k_long = attempt("k_long", lambda: experiment.pop("k_long", None))
        tol = attempt("tol", lambda: float(experiment.pop("tol", 1e-4)), 1e-4)
        inner = attempt("inner", lambda: int(experiment.pop("inner", 20)), 20)
        outer = attempt("outer", lambda: int(experiment.pop("outer", 5)), 5)
        intermediate = bool(experiment.pop("intermediate", False))
        for key, value in (("inner", inner), ("outer", outer)):
            if value < 1:
                violations.append((f"experiment.{key}", f"replication count must be >= 1, got {value}"))
        if not tol > 0:
            violations.append(("experiment.tol", f"tolerance must be positive, got {tol}"))
        for key, value in (("k_max", k_max), ("k_long", k_long)):
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 0):
                violations.append((f"experiment.{key}", f"expected a nonnegative integer, got {value!r}"))
        for key in experiment:
            violations.append((f"experiment.{key}", "unknown setting"))

        chaos = top("chaos", lambda: ChaosSettings.from_dict(d.pop("chaos", {})), ChaosSettings())
        tree = top("tree", lambda: TreeSettings.from_dict(d.pop("tree", {})), TreeSettings())
        concentration, concentration_reps = None, 100_000
        if "concentration" in d:
            raw = dict(d.pop("concentration"))
            concentration_reps = top(
                "concentration.replications",
                lambda: int(raw.pop("replications", 100_000)),
                100_000,
            )
            concentration = top(
                "concentration",
                lambda: ConcentrationTestCase.from_dict(raw, "concentration"),
            )
        elif kind == "concentration":
            violations.append(("concentration", "the concentration experiment needs a [concentration] table"))

        seed = top("seed", lambda: int(d.pop("seed", 0)), 0)
        out = str(d.pop("out", "results"))
        threads = top("threads", lambda: int(d.pop("threads", 1)), 1)
        if seed < 0:
            violations.append(("seed", f"seed must be a nonnegative integer, got {seed}"))
        if threads < 1:
            violations.append(("threads", f"thread count must be >= 1, got {threads}"))

        if violations:
            raise SpecError(violations)

        return cls(
            model=model,
            kind=kind,
            n_grid=n_grid,
            theta_rule=theta_rule,
            k_max=k_max,
            tol=tol,
            k_long=k_long,
            inner=inner,
            outer=outer,
            seed=seed,
            out=out,
            threads=threads,
            intermediate=intermediate,
            chaos=chaos,
            concentration=concentration,
            concentration_reps=concentration_reps,
            tree=tree,
            additional_properties=d,
        )


def parse_config(text: str) -> ExperimentConfig:
    """Parse a TOML or JSON configuration document

    Raises :class:`SpecError` listing every violation found.
    """
    try:
        if text.lstrip().startswith("{"):
            tree = json.loads(text)
        else:
            tree = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise SpecError.single("document", f"not a well-formed configuration ({exc})") from exc
    if not isinstance(tree, dict):
        raise SpecError.single("document", "expected a table at the top level")
    return ExperimentConfig.from_dict(tree)


def dump_config(config: ExperimentConfig) -> str:
    """Canonical JSON form, the input of the configuration hash"""
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


__all__ = [
    "EXPERIMENT_KINDS",
    "ChaosSettings",
    "ExperimentConfig",
    "TreeSettings",
    "dump_config",
    "parse_config",
]
