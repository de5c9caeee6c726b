"""The synchronous opinion recursion and its solved form"""

import math
from collections.abc import Iterator, Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from attrs import define, field
from loguru import logger as log
from scipy.special import gammaln, xlogy

from .errors import BoundsViolation, DimensionMismatch, SpecError
from .graph import normalize_weights
from .models import (
    GraphSample,
    ModelSpec,
    OpinionState,
    RowStochasticMatrix,
    SignalFrame,
    TrajectoryRecord,
)
from .streams import Purpose, generator
from .types import FloatArray, IntArray

BOUND_TOLERANCE = 1e-12
EXACT_COEFFICIENT_LIMIT = 60


def coefficient(s: int, t: int, c: float, d: float) -> float:
    """a_{s,t} = comb(t, s) (1 - c - d)^(t - s) c^s

    Exact binomials up to t = 60, log-gamma beyond. ``0**0`` is 1.
    """
    if not 0 <= s <= t:
        raise SpecError.single("s", f"coefficient needs 0 <= s <= t, got s={s}, t={t}")
    rest = max(1.0 - c - d, 0.0)
    if t <= EXACT_COEFFICIENT_LIMIT:
        return float(math.comb(t, s) * rest ** (t - s) * c**s)
    log_value = (
        gammaln(t + 1)
        - gammaln(s + 1)
        - gammaln(t - s + 1)
        + xlogy(t - s, rest)
        + xlogy(s, c)
    )
    return float(np.exp(log_value))


def coefficient_table(t_max: int, c: float, d: float) -> FloatArray:
    """A[s, t] = a_{s,t} for 0 <= s <= t <= t_max, zero above the diagonal"""
    table = np.zeros((t_max + 1, t_max + 1))
    exact = min(t_max, EXACT_COEFFICIENT_LIMIT)
    for t in range(exact + 1):
        for s in range(t + 1):
            table[s, t] = coefficient(s, t, c, d)

    if t_max > EXACT_COEFFICIENT_LIMIT:
        rest = max(1.0 - c - d, 0.0)
        s, t = np.meshgrid(np.arange(t_max + 1), np.arange(t_max + 1), indexing="ij")
        lower = (s <= t) & (t > EXACT_COEFFICIENT_LIMIT)
        sl, tl = s[lower], t[lower]
        table[lower] = np.exp(
            gammaln(tl + 1) - gammaln(sl + 1) - gammaln(tl - sl + 1) + xlogy(tl - sl, rest) + xlogy(sl, c),
        )
    return table


def check_bounds(R: FloatArray, where: str) -> None:
    """Raise if any opinion left [-1, 1] beyond the numerical tolerance"""
    worst = float(np.abs(R).max()) if R.size else 0.0
    if worst > 1.0 + BOUND_TOLERANCE:
        flat = int(np.abs(R).argmax())
        raise BoundsViolation(where, float(R.flat[flat]))


def initial_opinions(
    spec: ModelSpec,
    graph: GraphSample,
    seed: int,
    *,
    outer: int = 0,
    inner: int = 0,
) -> FloatArray:
    """R^(0) drawn from mu_0, rows identically distributed within each community"""
    if spec.initial_mode == "beliefs":
        return graph.Q.copy()

    rng = generator(seed, Purpose.INITIAL, outer=outer, inner=inner)
    if spec.initial_mode == "law" and spec.initial_dists is not None:
        R0 = np.zeros((graph.n, spec.ell))
        for r in range(spec.K):
            idx = np.flatnonzero(graph.labels == r)
            R0[idx] = spec.initial_dists[r].sample(rng, idx.size)
        return R0
    return rng.uniform(-1.0, 1.0, size=(graph.n, spec.ell))


def media_draws(
    spec: ModelSpec,
    labels: IntArray,
    Q: FloatArray,
    rng: np.random.Generator,
) -> FloatArray:
    """Z_i = (1 - omega_r) Z'_i + omega_r Q_i with Z'_i ~ nu_r"""
    Z = np.zeros((labels.size, spec.ell))
    for r in range(spec.K):
        idx = np.flatnonzero(labels == r)
        if idx.size:
            Z[idx] = spec.signal_dists[r].sample(rng, idx.size)
    omega = spec.belief_weight[labels][:, None]
    return (1 - omega) * Z + omega * Q


def assemble_signals(Z: FloatArray, Q: FloatArray, no_in_neighbors: np.ndarray, c: float, d: float) -> FloatArray:
    """W_i = d Z_i + c Q_i 1(d_i^- = 0)"""
    return d * Z + c * Q * no_in_neighbors[:, None]


def sample_signal_frame(
    spec: ModelSpec,
    graph: GraphSample,
    k: int,
    seed: int,
    *,
    outer: int = 0,
    inner: int = 0,
) -> SignalFrame:
    """Signals W^(k) feeding step k; each k has its own stream"""
    rng = generator(seed, Purpose.SIGNALS, outer=outer, inner=inner, extra=k)
    Z = media_draws(spec, graph.labels, graph.Q, rng)
    W = assemble_signals(Z, graph.Q, graph.no_in_neighbors, spec.c, spec.d)
    return SignalFrame(W=W, Z=Z, k=k)


def step(
    state: OpinionState,
    C: RowStochasticMatrix,
    frame: SignalFrame,
    c: float,
    d: float,
) -> OpinionState:
    """R^(k+1) = c C R^(k) + W^(k+1) + (1 - c - d) R^(k)"""
    if C.n != state.n:
        raise DimensionMismatch("C", (state.n, state.n), tuple(C.matrix.shape))
    if frame.W.shape != state.R.shape:
        raise DimensionMismatch("W", state.R.shape, frame.W.shape)

    R = c * C.matmul(state.R) + frame.W + (1.0 - c - d) * state.R
    check_bounds(R, f"step {state.k + 1}")
    return OpinionState(R=R, k=state.k + 1)


def iterate(
    spec: ModelSpec,
    graph: GraphSample,
    C: RowStochasticMatrix,
    k_max: int,
    seed: int,
    *,
    outer: int = 0,
    inner: int = 0,
    R0: FloatArray | None = None,
) -> Iterator[tuple[OpinionState, SignalFrame | None]]:
    """Yield (state, frame) for k = 0..k_max; the frame is None at k = 0"""
    if R0 is None:
        R0 = initial_opinions(spec, graph, seed, outer=outer, inner=inner)
    check_bounds(R0, "initial state")
    state = OpinionState(R=np.asarray(R0, dtype=float), k=0)
    yield state, None
    for k in range(1, k_max + 1):
        frame = sample_signal_frame(spec, graph, k, seed, outer=outer, inner=inner)
        state = step(state, C, frame, spec.c, spec.d)
        yield state, frame


@define(eq=False)
class SimulationResult:
    """
    Attributes:
        final (OpinionState): state at k_max
        trajectory (TrajectoryRecord): recorded vertices
        R0 (FloatArray): the initial state
        signals (list[FloatArray]): W^(1)..W^(k_max) when retained, else empty
    """

    final: OpinionState
    trajectory: TrajectoryRecord
    R0: FloatArray
    signals: list[FloatArray] = field(factory=list)


def simulate(
    spec: ModelSpec,
    graph: GraphSample,
    k_max: int,
    seed: int,
    *,
    record: Sequence[int] | IntArray = (),
    C: RowStochasticMatrix | None = None,
    outer: int = 0,
    inner: int = 0,
    R0: FloatArray | None = None,
    keep_signals: bool = False,
) -> SimulationResult:
    """Iterate :func:`step` k_max times, recording the selected vertices

    Signal history is kept only with ``keep_signals``; otherwise memory stays O(n ell).
    """
    if C is None:
        C = normalize_weights(graph)
    vertices = np.asarray(record, dtype=np.int64)
    trajectory = TrajectoryRecord.empty(vertices, graph.labels[vertices], spec.ell, k_max)
    signals: list[FloatArray] = []

    states = iterate(spec, graph, C, k_max, seed, outer=outer, inner=inner, R0=R0)
    state, _ = next(states)
    initial = state.R.copy()
    trajectory.record(state)
    for state, frame in states:
        if keep_signals and frame is not None:
            signals.append(frame.W)
        trajectory.record(state)

    log.debug(f"Simulated {k_max} steps on n={graph.n}")
    return SimulationResult(final=state, trajectory=trajectory, R0=initial, signals=signals)


def closed_form_state(
    C: RowStochasticMatrix,
    signal_history: Sequence[FloatArray],
    R0: FloatArray,
    c: float,
    d: float,
    k: int,
) -> OpinionState:
    """R^(k) = sum_t sum_s a_{s,t} C^s W^(k-t) + sum_s a_{s,k} C^s R^(0)"""
    if len(signal_history) < k:
        raise DimensionMismatch("signal history", (k,), (len(signal_history),))

    A = coefficient_table(k, c, d)

    def propagated(X: FloatArray, t: int) -> FloatArray:
        out = A[0, t] * X
        power = X
        for s in range(1, t + 1):
            power = C.matmul(power)
            out = out + A[s, t] * power
        return out

    R = propagated(np.asarray(R0, dtype=float), k)
    for t in range(k):
        R = R + propagated(np.asarray(signal_history[k - t - 1], dtype=float), t)
    return OpinionState(R=R, k=k)


def write_trajectories(records: Sequence[TrajectoryRecord], path: str | Path) -> Path:
    """Trajectory CSV with columns replication, vertex, community, time, topic, value"""
    table = pd.concat(
        [record.to_frame(replication) for replication, record in enumerate(records)],
        ignore_index=True,
    )
    path = Path(path)
    table.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


__all__ = [
    "BOUND_TOLERANCE",
    "SimulationResult",
    "assemble_signals",
    "check_bounds",
    "closed_form_state",
    "coefficient",
    "coefficient_table",
    "initial_opinions",
    "iterate",
    "media_draws",
    "sample_signal_frame",
    "simulate",
    "step",
    "write_trajectories",
]
