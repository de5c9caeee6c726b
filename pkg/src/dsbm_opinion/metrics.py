"""Error norms, chaos and stationarity statistics, and Monte Carlo checks of the concentration bounds"""

import math
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from attrs import define, field
from loguru import logger as log
from scipy import stats

from .dynamics import assemble_signals, initial_opinions, iterate, media_draws, simulate
from .errors import BudgetExceeded, DimensionMismatch, SpecError, UnknownFunction
from .graph import normalize_weights, sample_graph, sample_labels
from .gwtree import estimate_a_s, offspring_means, one_generation_bound
from .meanfield import (
    MeanFieldStream,
    build_M,
    build_model,
    meanfield_trajectory,
    regime_stats,
    sample_stationary,
    stationary_horizon,
)
from .models import (
    ASEstimate,
    ChaosReport,
    ChaosRow,
    ConcentrationRow,
    ConcentrationTestCase,
    ErrorCurve,
    ErrorSeries,
    MeanFieldModel,
    ModelSpec,
    OneStepRow,
    RateFit,
    StationarityReport,
    StationarityRow,
    ThetaRule,
    VectorLaw,
)
from .models.reports import NormType
from .runner import Runner
from .streams import Purpose, generator
from .types import UNSET, Estimate, FloatArray, IntArray, Unset, combined_stderr

CONTRACTION_LEVEL = 0.01
CONCENTRATION_CHUNK = 20_000
N_LAWS = ("poisson", "binomial")


def _require_replications(replications: int, what: str = "replications") -> None:
    if replications < 1:
        raise BudgetExceeded(f"{what} budget", 1, replications)


def _resolve_theta(spec: ModelSpec, theta: float | None) -> float:
    if theta is None:
        if isinstance(spec.theta, Unset):
            raise SpecError.single("theta", "no density parameter given")
        theta = spec.theta
    if not theta > 0:
        raise SpecError.single("theta", f"density parameter must be positive, got {theta}")
    return float(theta)


def _as_rule(theta_rule: ThetaRule | str | Callable[[int], float]) -> Callable[[int], float]:
    if isinstance(theta_rule, str):
        return ThetaRule.parse(theta_rule)
    return theta_rule


def matrix_inf_distance(Xa: FloatArray, Xb: FloatArray) -> float:
    """max_i sum_j |Xa_ij - Xb_ij|, the induced infinity norm of the difference"""
    Xa, Xb = np.asarray(Xa, dtype=float), np.asarray(Xb, dtype=float)
    if Xa.shape != Xb.shape:
        raise DimensionMismatch("Xb", Xa.shape, Xb.shape)
    if Xa.size == 0:
        return 0.0
    return float(np.abs(Xa - Xb).reshape(Xa.shape[0], -1).sum(axis=1).max())


def contraction_horizon(d: float, level: float = CONTRACTION_LEVEL) -> int:
    """Smallest k with (1 - d)^k < level"""
    if not 0 < d <= 1:
        raise SpecError.single("d", f"contraction needs 0 < d <= 1, got {d}")
    if d >= 1.0:
        return 1
    return math.floor(math.log(level) / math.log(1.0 - d)) + 1


# ---------------------------------------------------------------------------------------
# error curves


def _error_unit(
    spec: ModelSpec,
    labels: IntArray,
    theta: float,
    k_max: int,
    seed: int,
    outer: int,
    inner: int,
    intermediate: bool,
) -> dict[str, FloatArray]:
    """Row l1 distances (n, k_max + 1) between the graph run and its coupled averaged runs"""
    graph = sample_graph(spec, labels, theta, seed, outer=outer, inner=inner)
    C = normalize_weights(graph)
    model = build_model(spec, graph.n, theta, graph=graph)
    R0 = initial_opinions(spec, graph, seed, outer=outer, inner=inner)

    targets = {"": MeanFieldStream(model, labels, R0, k_max, "meanfield")}
    if intermediate:
        targets["_intermediate"] = MeanFieldStream(model, labels, R0, k_max, "intermediate")
    rows = {suffix: np.empty((graph.n, k_max + 1)) for suffix in targets}

    for state, frame in iterate(spec, graph, C, k_max, seed, outer=outer, inner=inner, R0=R0):
        for suffix, target in targets.items():
            value = target.value if frame is None else target.advance(frame.W)
            rows[suffix][:, state.k] = np.abs(state.R - value).sum(axis=1)
    return rows


@define
class _Accumulator:
    """Per-replication summaries of one outer label draw

    Given the labels, vertices of one community are exchangeable, so the expected
    row distance of every vertex equals its community average. Rows are pooled per
    community before taking the max over vertices.
    """

    labels: IntArray
    inf: list[FloatArray] = field(factory=list)
    community_rows: list[FloatArray] = field(factory=list)

    def add(self, rows: FloatArray) -> None:
        self.inf.append(rows.max(axis=0) if rows.size else np.zeros(rows.shape[1]))
        present = np.unique(self.labels)
        if present.size == 0:
            self.community_rows.append(np.zeros((1, rows.shape[1])))
            return
        self.community_rows.append(np.vstack([rows[self.labels == r].mean(axis=0) for r in present]))

    def inf_estimate(self) -> tuple[FloatArray, FloatArray]:
        values = np.vstack(self.inf)
        J = values.shape[0]
        se = values.std(axis=0, ddof=1) / math.sqrt(J) if J > 1 else np.zeros(values.shape[1])
        return values.mean(axis=0), se

    def row_estimate(self) -> tuple[FloatArray, FloatArray]:
        """max over communities of the mean pooled row distance, with the stderr of the maximizing one"""
        if not self.community_rows:
            raise BudgetExceeded("replications budget", 1, 0)
        values = np.stack(self.community_rows)
        J = values.shape[0]
        mean = values.mean(axis=0)
        columns = np.arange(mean.shape[1])
        at = mean.argmax(axis=0)
        if J > 1:
            se = values.std(axis=0, ddof=1)[at, columns] / math.sqrt(J)
        else:
            se = np.zeros(mean.shape[1])
        return mean[at, columns], se


def error_experiment(
    spec: ModelSpec,
    n_list: Sequence[int],
    theta_rule: ThetaRule | str | Callable[[int], float],
    k_max: int | None = None,
    replications: int = 20,
    seed: int = 0,
    *,
    outer: int = 5,
    intermediate: bool = False,
    runner: Runner | None = None,
    contraction: float = CONTRACTION_LEVEL,
) -> ErrorCurve:
    """Monte Carlo estimates of the distance between the graph process and the mean-field process

    For every n, ``outer`` label vectors are drawn; within each, ``replications``
    graphs are sampled and the graph run and the averaged runs share the same
    signals and initial state. Per time step this estimates E_n ||R - R_mf||_inf and
    max_i E_n ||R_i - R_mf_i||_1, plus the same against the intermediate process when
    ``intermediate`` is set.
    """
    _require_replications(replications)
    _require_replications(outer, "outer label draws")
    if not n_list:
        raise SpecError.single("n_grid", "at least one n is needed")
    rule = _as_rule(theta_rule)
    runner = runner or Runner(seed)

    truncated = False
    if k_max is None:
        k_max = contraction_horizon(spec.d, contraction)
    elif (1.0 - spec.d) ** k_max >= contraction:
        truncated = True
        log.warning(f"(1 - d)^k_max = {(1.0 - spec.d) ** k_max:.3g} is not below {contraction}; sup over k is truncated")

    suffixes = ["", "_intermediate"] if intermediate else [""]
    curve = ErrorCurve(k_max=k_max, truncated=truncated)
    for n in n_list:
        theta = float(rule(n))
        if not theta > 0:
            raise SpecError.single("theta_rule", f"theta({n}) = {theta} is not positive")
        log.info(f"Error experiment at n={n}, theta={theta:.4g}: {outer} x {replications} replications")

        estimates: dict[str, list[FloatArray]] = {f"{kind}{s}": [] for kind in ("inf", "row_l1") for s in suffixes}
        stderrs: dict[str, list[FloatArray]] = {key: [] for key in estimates}
        dense: list[Unset | bool] = []
        for o in range(outer):
            labels = sample_labels(spec, n, seed, outer=o)
            regime = build_model(spec, n, theta, labels=labels).regime
            dense.append(UNSET if regime is None else regime.dense_threshold_ok)

            sums = {s: _Accumulator(labels) for s in suffixes}
            batch = max(runner.threads, 1)
            for start in range(0, replications, batch):
                units = [
                    (spec, labels, theta, k_max, seed, o, j, intermediate)
                    for j in range(start, min(start + batch, replications))
                ]
                for result in runner.map(_error_unit, units):
                    for s in suffixes:
                        sums[s].add(result[s])

            for s in suffixes:
                value, se = sums[s].inf_estimate()
                estimates[f"inf{s}"].append(value)
                stderrs[f"inf{s}"].append(se)
                value, se = sums[s].row_estimate()
                estimates[f"row_l1{s}"].append(value)
                stderrs[f"row_l1{s}"].append(se)

        dense_ok: Unset | bool = UNSET if any(isinstance(x, Unset) for x in dense) else all(dense)
        for norm_type in estimates:
            curve.series.append(
                ErrorSeries(
                    n=int(n),
                    theta=theta,
                    norm_type=norm_type,  # type: ignore[arg-type]
                    estimates=np.vstack(estimates[norm_type]),
                    stderrs=np.vstack(stderrs[norm_type]),
                    reps=replications,
                    dense_ok=dense_ok,
                    clipping_active=spec.clipping_active(n, theta),
                ),
            )
    return curve


def fit_rate(curve: ErrorCurve, norm_type: NormType = "inf") -> RateFit:
    """Regress log(sup-k error) on log sqrt(log n / theta) across the n grid"""
    x, y = [], []
    for series in curve.select(norm_type):
        _, est = series.sup()
        if est.value <= 0 or series.n < 2:
            log.warning(f"Skipping n={series.n} in the rate fit (sup error {est.value:.3g})")
            continue
        x.append(0.5 * math.log(math.log(series.n) / series.theta))
        y.append(math.log(est.value))
    if len(x) < 2:
        raise SpecError.single("n_grid", f"a rate fit needs two usable points, got {len(x)}")
    fit = stats.linregress(x, y)
    return RateFit(
        norm_type=norm_type,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r2=float(fit.rvalue**2),
        points=len(x),
    )


# ---------------------------------------------------------------------------------------
# propagation of chaos


@define(frozen=True)
class ChaosFunction:
    """Bounded test function of an ell x (k + 1) trajectory matrix

    Evaluation is vectorized over leading axes: ``f(V)`` with ``V`` of shape
    (m, ell, k + 1) returns shape (m,).

    Attributes:
        name (str): the id it was parsed from
        kind (str): ``const``, ``proj``, ``prod`` or ``poly``
        terms (tuple[tuple[int, int], ...]): (topic, time) coordinates it reads
        coefficients (tuple[float, ...]): polynomial coefficients, lowest degree first
    """

    name: str
    kind: Literal["const", "proj", "prod", "poly"]
    terms: tuple[tuple[int, int], ...] = ()
    coefficients: tuple[float, ...] = ()

    @property
    def bound(self) -> float:
        """sup |f| over trajectories in [-1, 1]"""
        return 1.0

    def __call__(self, V: FloatArray) -> FloatArray:
        V = np.asarray(V, dtype=float)
        if self.kind == "const":
            return np.ones(V.shape[:-2])
        if self.kind == "poly":
            topic, time = self.terms[0]
            value = np.polynomial.polynomial.polyval(V[..., topic, time], self.coefficients)
            return np.clip(value, -1.0, 1.0)
        out = np.ones(V.shape[:-2])
        for topic, time in self.terms:
            out = out * V[..., topic, time]
        return out


def parse_function(name: str, ell: int, k: int) -> ChaosFunction:
    """Parse a built-in test function id

    ``const``; ``proj:topic[:time]``; ``prod:topic:time,topic:time,...``;
    ``poly:topic:c0:c1:...`` (the clipped polynomial of the topic at time k).
    Times default to k.
    """
    kind, _, rest = name.strip().partition(":")
    try:
        if kind == "const" and not rest:
            return ChaosFunction(name=name, kind="const")
        if kind == "proj" and rest:
            parts = [int(x) for x in rest.split(":")]
            if len(parts) > 2:
                raise ValueError(rest)
            terms = ((parts[0], parts[1] if len(parts) == 2 else k),)
            func = ChaosFunction(name=name, kind="proj", terms=terms)
        elif kind == "prod" and rest:
            pairs = [tuple(int(x) for x in term.split(":")) for term in rest.split(",")]
            if any(len(p) != 2 for p in pairs):
                raise ValueError(rest)
            func = ChaosFunction(name=name, kind="prod", terms=tuple(pairs))  # type: ignore[arg-type]
        elif kind == "poly" and rest:
            topic, *raw = rest.split(":")
            if not raw:
                raise ValueError(rest)
            func = ChaosFunction(
                name=name,
                kind="poly",
                terms=((int(topic), k),),
                coefficients=tuple(float(c) for c in raw),
            )
        else:
            raise UnknownFunction(name)
    except ValueError:
        raise UnknownFunction(name) from None

    for topic, time in func.terms:
        if not 0 <= topic < ell or not 0 <= time <= k:
            raise SpecError.single(
                "functions",
                f"{name!r} reads topic {topic} at time {time}, outside ell={ell}, k={k}",
            )
    return func


def pick_vertices(labels: IntArray, communities: Sequence[int]) -> IntArray:
    """For each requested community, the lowest vertex of it not used earlier in the set"""
    taken: dict[int, int] = {}
    out = []
    for r in communities:
        members = np.flatnonzero(labels == r)
        position = taken.get(r, 0)
        if position >= members.size:
            raise SpecError.single(
                "vertex_sets",
                f"community {r} has {members.size} vertices, {position + 1} requested",
            )
        out.append(int(members[position]))
        taken[r] = position + 1
    return np.asarray(out, dtype=np.int64)


def limit_trajectories(
    spec: ModelSpec,
    model: MeanFieldModel,
    r: int,
    size: int,
    k: int,
    seed: int,
) -> FloatArray:
    """Mean-field trajectories of ``size`` independent community-r vertices, shape (size, ell, k + 1)"""
    rng = generator(seed, Purpose.CHAOS_LIMIT, extra=r)
    labels = np.full(size, r, dtype=np.int64)
    Q = spec.belief_dists[r].sample(rng, size)
    isolated = rng.random(size) < model.p_no_in_neighbors[r]
    if spec.initial_mode == "beliefs":
        R0 = Q.copy()
    elif spec.initial_mode == "law" and spec.initial_dists is not None:
        R0 = spec.initial_dists[r].sample(rng, size)
    else:
        R0 = rng.uniform(-1.0, 1.0, size=(size, spec.ell))

    signals = np.empty((k, size, spec.ell))
    for t in range(k):
        Z = media_draws(spec, labels, Q, rng)
        signals[t] = assemble_signals(Z, Q, isolated, spec.c, spec.d)
    trajectory = meanfield_trajectory(
        labels, signals, model.M, model.W_bar, model.R_bar, R0, spec.c, spec.d, k,
    )  # fmt: skip
    return trajectory.values


def _chaos_unit(
    spec: ModelSpec,
    labels: IntArray,
    theta: float,
    k: int,
    seed: int,
    outer: int,
    inner: int,
    chosen: Sequence[IntArray],
    set_functions: Sequence[Sequence[ChaosFunction]],
    empirical_functions: Sequence[ChaosFunction],
) -> tuple[FloatArray, FloatArray]:
    graph = sample_graph(spec, labels, theta, seed, outer=outer, inner=inner)
    result = simulate(spec, graph, k, seed, record=np.arange(graph.n), outer=outer, inner=inner)
    V = result.trajectory.values

    products = np.array(
        [np.prod([f(V[v]) for v, f in zip(vertices, funcs)]) for vertices, funcs in zip(chosen, set_functions)],
    )
    empirical = np.array(
        [np.bincount(labels, weights=f(V), minlength=spec.K) / graph.n for f in empirical_functions],
    ).reshape(len(empirical_functions), spec.K)
    return products, empirical


def _product_estimate(parts: Sequence[Estimate]) -> Estimate:
    """Product of independent estimates, stderr by the delta method"""
    values = np.array([p.value for p in parts])
    value = float(np.prod(values))
    terms = [np.prod(np.delete(values, j)) * p.stderr for j, p in enumerate(parts)]
    return Estimate(value=value, stderr=combined_stderr(*terms), reps=min(p.reps for p in parts))


def chaos_experiment(
    spec: ModelSpec,
    n: int,
    k: int,
    vertex_sets: Sequence[Sequence[int]],
    functions: Sequence[Sequence[str]],
    replications: int,
    seed: int,
    *,
    theta: float | None = None,
    outer: int = 1,
    limit_replications: int | None = None,
    runner: Runner | None = None,
) -> ChaosReport:
    """Estimate both sides of the factorization and of the empirical-measure limit

    ``vertex_sets`` lists community indices; each set takes, per community, the lowest
    vertex of that community not already in the set. ``functions[m][j]`` is the test
    function applied to the j-th vertex of set m. Every distinct function also yields
    one empirical-measure row per community.
    """
    _require_replications(replications)
    _require_replications(outer, "outer label draws")
    theta = _resolve_theta(spec, theta)
    if len(functions) != len(vertex_sets):
        raise DimensionMismatch("functions", (len(vertex_sets),), (len(functions),))
    for m, (communities, funcs) in enumerate(zip(vertex_sets, functions)):
        if len(communities) != len(funcs):
            raise DimensionMismatch(f"functions[{m}]", (len(communities),), (len(funcs),))
        for r in communities:
            if not 0 <= r < spec.K:
                raise SpecError.single(f"vertex_sets[{m}]", f"community {r} is not in 0..{spec.K - 1}")

    set_functions = [[parse_function(f, spec.ell, k) for f in funcs] for funcs in functions]
    empirical_functions = list({f.name: f for funcs in set_functions for f in funcs}.values())
    runner = runner or Runner(seed)

    products, empirical = [], []
    first_chosen: list[IntArray] = []
    for o in range(outer):
        labels = sample_labels(spec, n, seed, outer=o)
        chosen = [pick_vertices(labels, communities) for communities in vertex_sets]
        if o == 0:
            first_chosen = chosen
        units = [
            (spec, labels, theta, k, seed, o, j, chosen, set_functions, empirical_functions)
            for j in range(replications)
        ]
        for p, e in runner.map(_chaos_unit, units):
            products.append(p)
            empirical.append(e)
    products_ = np.vstack(products).reshape(-1, len(vertex_sets))
    empirical_ = np.stack(empirical)

    model = build_model(spec, n, theta)
    size = limit_replications or 10 * replications * outer
    limits = {r: limit_trajectories(spec, model, r, size, k, seed) for r in range(spec.K) if spec.pi[r] > 0}

    def conditional(f: ChaosFunction, r: int) -> Estimate:
        if r not in limits:
            return Estimate(value=0.0, stderr=0.0, reps=0)
        return Estimate.from_samples(f(limits[r]))

    report = ChaosReport()
    for m, (communities, funcs) in enumerate(zip(vertex_sets, set_functions)):
        report.rows.append(
            ChaosRow(
                n=n,
                k=k,
                statistic="product",
                vertices=tuple(int(v) for v in first_chosen[m]),
                communities=tuple(int(r) for r in communities),
                functions=tuple(f.name for f in funcs),
                graph=Estimate.from_samples(products_[:, m]),
                limit=_product_estimate([conditional(f, r) for f, r in zip(funcs, communities)]),
            ),
        )
    for a, f in enumerate(empirical_functions):
        for r in range(spec.K):
            cond = conditional(f, r)
            report.rows.append(
                ChaosRow(
                    n=n,
                    k=k,
                    statistic="empirical",
                    vertices=(),
                    communities=(r,),
                    functions=(f.name,),
                    graph=Estimate.from_samples(empirical_[:, a, r]),
                    limit=Estimate(
                        value=float(spec.pi[r] * cond.value),
                        stderr=float(spec.pi[r] * cond.stderr),
                        reps=cond.reps,
                    ),
                ),
            )
    log.info(f"Chaos experiment at n={n}, k={k}: {len(report.rows)} rows")
    return report


# ---------------------------------------------------------------------------------------
# stationarity


def _stationary_unit(
    spec: ModelSpec,
    labels: IntArray,
    theta: float,
    k_long: int,
    seed: int,
    inner: int,
) -> tuple[FloatArray, FloatArray]:
    """Per-community (K, ell) first and second empirical moments of R^(k_long)"""
    graph = sample_graph(spec, labels, theta, seed, inner=inner)
    R = simulate(spec, graph, k_long, seed, inner=inner).final.R
    counts = np.maximum(np.bincount(labels, minlength=spec.K), 1)[:, None]
    first = np.zeros((spec.K, spec.ell))
    second = np.zeros((spec.K, spec.ell))
    np.add.at(first, labels, R)
    np.add.at(second, labels, R**2)
    return first / counts, second / counts


def stationarity_experiment(
    spec: ModelSpec,
    n: int,
    k_long: int,
    replications: int,
    tol: float,
    seed: int,
    *,
    theta: float | None = None,
    limit_replications: int | None = None,
    runner: Runner | None = None,
) -> StationarityReport:
    """Per-community moments of the long-run graph opinions against stationary samples"""
    _require_replications(replications)
    theta = _resolve_theta(spec, theta)
    if (1.0 - spec.d) ** k_long >= tol:
        log.warning(f"Burn-in k_long={k_long} leaves (1 - d)^k_long = {(1.0 - spec.d) ** k_long:.3g} >= {tol}")
    runner = runner or Runner(seed)

    labels = sample_labels(spec, n, seed)
    results = runner.map(_stationary_unit, [(spec, labels, theta, k_long, seed, j) for j in range(replications)])
    first = np.stack([r[0] for r in results])
    second = np.stack([r[1] for r in results])

    model = build_model(spec, n, theta, labels=labels)
    size = limit_replications or 10 * replications
    counts = np.bincount(labels, minlength=spec.K)
    report = StationarityReport(k_long=k_long, horizon=stationary_horizon(tol, spec.d, spec.ell))
    for r in range(spec.K):
        if counts[r] == 0:
            continue
        draws = sample_stationary(r, spec, model, tol, seed, size=size)
        for topic in range(spec.ell):
            for moment, empirical, limit in (
                ("mean", first[:, r, topic], draws[:, topic]),
                ("second", second[:, r, topic], draws[:, topic] ** 2),
            ):
                report.rows.append(
                    StationarityRow(
                        n=n,
                        community=r,
                        moment=moment,  # type: ignore[arg-type]
                        topic=topic,
                        empirical=Estimate.from_samples(empirical),
                        stationary=Estimate.from_samples(limit),
                    ),
                )
    log.info(f"Stationarity experiment at n={n}: horizon {report.horizon}, burn-in {k_long}")
    return report


# ---------------------------------------------------------------------------------------
# concentration of random sums


def _tail_exponent(eps: float, mu: float, nu: float, H: float) -> float:
    return -((eps * mu) ** 2) / (2 * nu) + H * (eps * mu) ** 3 / (2 * nu**2)


def sum_bound(eps: float, mu: float, nu: float, H: float) -> float:
    """exp(-(eps mu)^2 / (2 nu) + H (eps mu)^3 / (2 nu^2)); 1 when nu = 0"""
    if nu <= 0:
        return 1.0
    return float(np.exp(_tail_exponent(eps, mu, nu, H)))


def ratio_bound(eps: float, mu: float, nu: float, H: float) -> float:
    """4 exp(-(eps/2)^2 mu^2 / (2 nu) + H (eps/2)^3 mu^3 / (2 nu^2)); 1 when nu = 0"""
    if nu <= 0:
        return 1.0
    return float(4 * np.exp(_tail_exponent(eps / 2, mu, nu, H)))


def _check_case(case: ConcentrationTestCase) -> None:
    violations = []
    if case.N_law not in N_LAWS:
        violations.append(("N_law", f"expected one of {', '.join(N_LAWS)}, got {case.N_law!r}"))
    if any(m < 0 for m in case.N_means):
        violations.append(("N_means", "means must be nonnegative"))
    if case.N_law == "binomial":
        trials = case.N_trials or ()
        if len(trials) != case.K:
            violations.append(("N_trials", f"expected {case.K} trial counts, got {len(trials)}"))
        elif any(m > t for m, t in zip(case.N_means, trials)):
            violations.append(("N_trials", "every mean must be at most its trial count"))
    low, high = case.weight_dist.support()
    if low < 0 or high > case.H:
        violations.append(("weight", f"support [{low}, {high}] is not inside [0, {case.H}]"))
    low, high = case.x_dist.support()
    if low < -1 or high > 1:
        violations.append(("x", f"support [{low}, {high}] is not inside [-1, 1]"))
    if violations:
        raise SpecError(violations)


def _concentration_chunk(
    case: ConcentrationTestCase,
    seed: int,
    chunk: int,
    size: int,
    thresholds: FloatArray,
) -> tuple[IntArray, IntArray]:
    """Exceedance counts (sum, ratio) per eps over one chunk of replications"""
    rng = generator(seed, Purpose.CONCENTRATION, inner=chunk)
    means = np.asarray(case.N_means)
    if case.N_law == "binomial":
        trials = np.asarray(case.N_trials, dtype=np.int64)
        p = np.divide(means, trials, out=np.zeros_like(means), where=trials > 0)
        N = rng.binomial(trials, p, size=(size, case.K))
    else:
        N = rng.poisson(means, size=(size, case.K))
    totals = N.sum(axis=1)
    rep = np.repeat(np.arange(size), totals)
    B = case.weight_dist.sample(rng, int(totals.sum()))
    X = case.x_dist.sample(rng, int(totals.sum()))
    S = np.bincount(rep, weights=B, minlength=size)
    S_tilde = np.bincount(rep, weights=X * B, minlength=size)

    mu, eps = case.mu, thresholds
    target = case.x_dist.mean()
    ratio = np.divide(S_tilde, S, out=np.zeros(size), where=S > 0)
    sum_hits = ((S - mu)[:, None] > eps[None, :] * mu).sum(axis=0)
    ratio_hits = (np.abs(ratio - target)[:, None] > eps[None, :]).sum(axis=0)
    return sum_hits, ratio_hits


def concentration_check(
    case: ConcentrationTestCase,
    replications: int,
    seed: int,
    *,
    runner: Runner | None = None,
    chunk_size: int = CONCENTRATION_CHUNK,
) -> list[ConcentrationRow]:
    """Empirical tails of random sums and of their ratio against the analytic bounds

    The sum statistic is P(sum_r (S_r - E S_r) > eps mu) with S_r a sum of N_r weights;
    the ratio statistic is P(|sum S_tilde / sum S - E[X]| > eps) with S_tilde a sum of
    X B. A ratio with a zero denominator counts as 0.
    """
    _require_replications(replications)
    _check_case(case)
    runner = runner or Runner(seed)
    eps = np.asarray(case.eps, dtype=float)
    units = [
        (case, seed, c, min(chunk_size, replications - start), eps)
        for c, start in enumerate(range(0, replications, chunk_size))
    ]
    hits = runner.map(_concentration_chunk, units)
    sum_hits = np.sum([h[0] for h in hits], axis=0)
    ratio_hits = np.sum([h[1] for h in hits], axis=0)

    mu, nu = case.mu, case.nu
    rows = []
    for statistic, counts, bound in (("ratio", ratio_hits, ratio_bound), ("sum", sum_hits, sum_bound)):
        for e, count in zip(eps, counts):
            p = float(count) / replications
            row = ConcentrationRow(
                statistic=statistic,  # type: ignore[arg-type]
                eps=float(e),
                empirical=p,
                stderr=math.sqrt(p * (1 - p) / replications),
                bound=bound(float(e), mu, nu, case.H),
                reps=replications,
                mu=mu,
                nu=nu,
            )
            if not row.informative:
                log.warning(f"{statistic} bound at eps={e:g} is {row.bound:.3g} > 1, the check is vacuous")
            elif not row.passed:
                log.warning(f"{statistic} tail at eps={e:g} is {p:.3g}, above the bound {row.bound:.3g}")
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------------------
# one-step concentration of C around the averaged operator


def _one_step_unit(
    spec: ModelSpec,
    labels: IntArray,
    theta: float,
    seed: int,
    inner: int,
    x_laws: Sequence[VectorLaw],
    x_bar: FloatArray,
    target: FloatArray,
) -> tuple[float, float]:
    graph = sample_graph(spec, labels, theta, seed, inner=inner)
    C = normalize_weights(graph)
    rng = generator(seed, Purpose.CONCENTRATION, inner=inner, extra=1)
    X = np.zeros((graph.n, spec.ell))
    for r, law in enumerate(x_laws):
        idx = np.flatnonzero(labels == r)
        X[idx] = law.sample(rng, idx.size)
    averaged = target[labels]
    return (
        matrix_inf_distance(C.matmul(X), averaged),
        matrix_inf_distance(C.matmul(x_bar[labels]), averaged),
    )


def one_step_concentration(
    spec: ModelSpec,
    n: int,
    replications: int,
    seed: int,
    *,
    theta: float | None = None,
    x_laws: Sequence[VectorLaw] | None = None,
    runner: Runner | None = None,
) -> list[OneStepRow]:
    """E_n ||C X - M_tilde X_breve||_inf and E_n ||(C - M_tilde) X_breve||_inf next to sqrt(log n / theta)

    X has independent rows drawn from the per-community ``x_laws`` (the signal laws by
    default); (M_tilde X_breve)_i is (M_breve x_bar)_{J_i}.
    """
    _require_replications(replications)
    theta = _resolve_theta(spec, theta)
    runner = runner or Runner(seed)
    x_laws = tuple(x_laws or spec.signal_dists)
    x_bar = np.vstack([law.mean() for law in x_laws])

    labels = sample_labels(spec, n, seed)
    model = build_model(spec, n, theta, labels=labels)
    target = model.M_breve @ x_bar
    results = np.array(
        runner.map(
            _one_step_unit,
            [(spec, labels, theta, seed, j, x_laws, x_bar, target) for j in range(replications)],
        ),
    ).reshape(replications, 2)
    rate = math.sqrt(math.log(n) / theta) if n > 1 else 0.0
    return [
        OneStepRow(n=n, theta=theta, statistic="CX", estimate=Estimate.from_samples(results[:, 0]), rate=rate),
        OneStepRow(n=n, theta=theta, statistic="C_minus_M", estimate=Estimate.from_samples(results[:, 1]), rate=rate),
    ]


# ---------------------------------------------------------------------------------------
# branching-tree scaling


def tree_experiment(
    spec: ModelSpec,
    thetas: Sequence[float],
    s_values: Sequence[int],
    replications: int,
    seed: int,
    *,
    root_types: Sequence[int] | None = None,
    x_laws: Sequence[VectorLaw] | None = None,
    runner: Runner | None = None,
    budget: float | None = None,
) -> list[ASEstimate]:
    """a_s(r) estimates over a grid of theta and generations, on trees built from pi

    X_hat is drawn per node from ``x_laws`` (the signal laws by default) and compared
    with M^s applied to the law means. Rows with s = 1 carry the explicit bound.
    """
    _require_replications(replications)
    runner = runner or Runner(seed)
    x_laws = tuple(x_laws or spec.signal_dists)
    x = np.vstack([law.mean() for law in x_laws])
    M = build_M(spec.pi, spec.kappa, spec.weight_means())
    if root_types is None:
        root_types = [r for r in range(spec.K) if spec.pi[r] > 0]
    extra: dict[str, Any] = {} if budget is None else {"budget": budget}

    rows = []
    for theta in thetas:
        q = offspring_means(spec, spec.pi, theta)
        regime = regime_stats(spec, spec.pi, 1, theta)
        for r in root_types:
            for s in s_values:
                estimate = estimate_a_s(
                    r, s, x, M, replications, seed, q=q, spec=spec, x_laws=x_laws, runner=runner, **extra,
                )  # fmt: skip
                bound: Unset | float = UNSET
                if s == 1 and not isinstance(regime.Delta, Unset) and not isinstance(regime.Lambda, Unset):
                    bound = one_generation_bound(theta, regime.Delta, regime.Lambda, spec.H)
                rows.append(ASEstimate(theta=float(theta), root_type=r, s=s, estimate=estimate, bound=bound))
                log.debug(f"a_{s}({r}) at theta={theta:g}: {estimate.value:.4g} +- {estimate.stderr:.2g}")
    return rows


def fit_tree_slope(rows: Sequence[ASEstimate], s: int, root_type: int = 0) -> RateFit:
    """Regress log a_s on log theta"""
    points = [
        (math.log(row.theta), math.log(row.estimate.value))
        for row in rows
        if row.s == s and row.root_type == root_type and row.estimate.value > 0
    ]
    if len(points) < 2:
        raise SpecError.single("thetas", f"a slope fit needs two usable points, got {len(points)}")
    x, y = zip(*points)
    fit = stats.linregress(x, y)
    return RateFit(
        norm_type=f"a_{s}",
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r2=float(fit.rvalue**2),
        points=len(points),
    )


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """UTF-8, comma separated, header row, newline line endings"""
    path = Path(path)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


__all__ = [
    "CONTRACTION_LEVEL",
    "ChaosFunction",
    "chaos_experiment",
    "concentration_check",
    "contraction_horizon",
    "error_experiment",
    "fit_rate",
    "fit_tree_slope",
    "limit_trajectories",
    "matrix_inf_distance",
    "one_step_concentration",
    "parse_function",
    "pick_vertices",
    "ratio_bound",
    "stationarity_experiment",
    "sum_bound",
    "tree_experiment",
    "write_csv",
]
