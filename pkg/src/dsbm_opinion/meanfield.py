"""Averaged K x K dynamics: the mean-field process, the intermediate process and the stationary limit"""

import json
import math
from pathlib import Path

import numpy as np
from loguru import logger as log

from .dynamics import check_bounds, coefficient_table, media_draws
from .errors import DimensionMismatch, SpecError
from .models import (
    GraphSample,
    MeanFieldModel,
    MeanFieldTrajectory,
    ModelSpec,
    RegimeStats,
)
from .models.mean_field import TrajectoryKind
from .streams import Purpose, generator
from .types import UNSET, FloatArray, IntArray, Unset


def build_M(pi: FloatArray, kappa: FloatArray, beta: FloatArray) -> FloatArray:
    """m_rs = pi_s beta_rs kappa(s, r) / sum_t pi_t beta_rt kappa(t, r), zero rows allowed"""
    pi = np.asarray(pi, dtype=float)
    weights = np.asarray(beta, dtype=float) * (pi[None, :] * np.asarray(kappa, dtype=float).T)
    totals = weights.sum(axis=1)
    out = np.zeros_like(weights)
    positive = totals > 0
    out[positive] = weights[positive] / totals[positive, None]
    return out


def build_breve_M(pi_hat: FloatArray, kappa: FloatArray, beta: FloatArray) -> FloatArray:
    """Same as :func:`build_M` with the empirical shares"""
    return build_M(pi_hat, kappa, beta)


def materialize_M_tilde(labels: IntArray, M_breve: FloatArray, pi_hat: FloatArray) -> FloatArray:
    """Dense n x n M_tilde with M_tilde_ij = M_breve[J_i, J_j] / (n pi_hat_{J_j})

    Only meant for small-n checks of the row identity
    (M_tilde^s X_breve)_i = (M_breve^s x_bar)_{J_i}.
    """
    labels = np.asarray(labels, dtype=np.int64)
    counts = pi_hat * labels.size
    scale = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    return M_breve[labels[:, None], labels[None, :]] * scale[labels][None, :]


def weight_moments(spec: ModelSpec, graph: GraphSample | None = None) -> tuple[FloatArray, FloatArray]:
    """(beta, v), analytic from the weight laws or plug-in from a realized graph

    The plug-in estimate falls back to the analytic value for community pairs that
    have no edge in the graph.
    """
    beta, v = spec.weight_means(), spec.weight_second_moments()
    if spec.moments != "plugin" or graph is None:
        return beta, v

    rows, cols, data = graph.edges()
    pair = graph.labels[rows] * spec.K + graph.labels[cols]
    counts = np.bincount(pair, minlength=spec.K**2).reshape(spec.K, spec.K)
    sums = np.bincount(pair, weights=data, minlength=spec.K**2).reshape(spec.K, spec.K)
    squares = np.bincount(pair, weights=data**2, minlength=spec.K**2).reshape(spec.K, spec.K)
    seen = counts > 0
    beta = np.where(seen, sums / np.maximum(counts, 1), beta)
    v = np.where(seen, squares / np.maximum(counts, 1), v)
    log.debug(f"Plug-in weight moments from {graph.edge_count} edges")
    return beta, v


def p_no_in_neighbors(spec: ModelSpec, counts: FloatArray, n: int, theta: float) -> FloatArray:
    """P(d_i^- = 0 | J_i = r) = prod_s (1 - p_sr)^(count_s - 1(s = r)), exact at finite n"""
    P = spec.edge_probabilities(n, theta)
    exponents = np.asarray(counts, dtype=float)[:, None] - np.eye(spec.K)
    exponents = np.maximum(exponents, 0.0)
    return np.prod(np.power(1.0 - P, exponents), axis=0)


def mean_matrices(
    spec: ModelSpec,
    n: int,
    theta: float,
    counts: FloatArray | None = None,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """(W_bar, R_bar, P0): conditional means of W^(0) and R^(0) and P(d^- = 0 | r)

    ``counts`` is the community census; n pi is used when it is not given.
    """
    if counts is None:
        counts = spec.pi * n
    P0 = p_no_in_neighbors(spec, counts, n, theta)
    W_bar = spec.d * spec.signal_means() + spec.c * spec.belief_means() * P0[:, None]
    return W_bar, spec.initial_means(), P0


def regime_stats(
    spec: ModelSpec,
    pi_hat: FloatArray,
    n: int,
    theta: float,
    *,
    beta: FloatArray | None = None,
    v: FloatArray | None = None,
) -> RegimeStats:
    """mu, nu, Delta, Lambda, E_n and the dense-threshold flag of one (n, theta) point"""
    if beta is None or v is None:
        beta, v = spec.weight_means(), spec.weight_second_moments()
    pi_hat = np.asarray(pi_hat, dtype=float)
    support = pi_hat[:, None] * spec.kappa  # [s, r]
    mu = np.einsum("rs,sr->r", beta, support)
    nu = np.einsum("rs,sr->r", v, support)

    rows = np.flatnonzero(build_M(spec.pi, spec.kappa, beta).sum(axis=1) > 0)
    rows = rows[(mu[rows] > 0) & (nu[rows] > 0)]

    Delta: Unset | float = UNSET
    Lambda: Unset | float = UNSET
    threshold: Unset | float = UNSET
    dense_ok: Unset | bool = UNSET
    if rows.size:
        Delta = float(np.max(nu[rows] / mu[rows] ** 2))
        Lambda = float(np.max(mu[rows] / nu[rows]))
        threshold = (6 * spec.H * Lambda) ** 2 * Delta * math.log(n) if n > 1 else 0.0
        dense_ok = bool(theta >= threshold)
    else:
        log.warning("No nonzero row in M; Delta and Lambda are undefined")

    pi = spec.pi
    denominator = pi_hat[:, None] * pi[None, :]  # [r, s]
    numerator = np.abs(pi_hat[None, :] * pi[:, None] - pi[None, :] * pi_hat[:, None])
    valid = denominator > 0
    E_n = float(np.max(numerator[valid] / denominator[valid])) if valid.any() else 0.0

    return RegimeStats(
        n=int(n),
        theta=float(theta),
        mu=mu,
        nu=nu,
        Delta=Delta,
        Lambda=Lambda,
        E_n=E_n,
        threshold=threshold,
        dense_threshold_ok=dense_ok,
        clipping_active=spec.clipping_active(n, theta),
    )


def build_model(
    spec: ModelSpec,
    n: int,
    theta: float,
    *,
    labels: IntArray | None = None,
    graph: GraphSample | None = None,
) -> MeanFieldModel:
    """Everything the averaged dynamics needs at one (n, theta) point

    Without labels the empirical shares equal pi and M_breve equals M.
    """
    if graph is not None:
        labels = graph.labels
    if labels is not None:
        counts = np.bincount(labels, minlength=spec.K).astype(float)
        pi_hat = counts / counts.sum()
    else:
        counts, pi_hat = spec.pi * n, spec.pi.copy()

    beta, v = weight_moments(spec, graph)
    M = build_M(spec.pi, spec.kappa, beta)
    M_breve = build_breve_M(pi_hat, spec.kappa, beta)
    W_bar, R_bar, P0 = mean_matrices(spec, n, theta, counts)
    regime = regime_stats(spec, pi_hat, n, theta, beta=beta, v=v)
    return MeanFieldModel(
        M=M,
        M_breve=M_breve,
        beta=beta,
        v=v,
        W_bar=W_bar,
        R_bar=R_bar,
        nonzero_rows=np.flatnonzero(M.sum(axis=1) > 0),
        c=spec.c,
        d=spec.d,
        regime=regime,
        p_no_in_neighbors=P0,
    )


def power_stack(matrix: FloatArray, X: FloatArray, s_max: int) -> FloatArray:
    """out[s] = matrix^s X for s = 0..s_max"""
    out = np.empty((s_max + 1, *X.shape))
    out[0] = X
    for s in range(1, s_max + 1):
        out[s] = matrix @ out[s - 1]
    return out


def deterministic_parts(
    matrix: FloatArray,
    W_bar: FloatArray,
    R_bar: FloatArray,
    c: float,
    d: float,
    k_max: int,
) -> FloatArray:
    """D[k] = 1(k >= 2) sum_{t<k} sum_{s<=t} a_{s,t} (matrix^s W_bar) + sum_{s<=k} a_{s,k} (matrix^s R_bar)

    Shape (k_max + 1, K, ell); every sum starts at s = 1.
    """
    A = coefficient_table(k_max, c, d)[1:]
    G = np.einsum("st,skl->tkl", A, power_stack(matrix, W_bar, k_max)[1:])
    H = np.einsum("st,skl->tkl", A, power_stack(matrix, R_bar, k_max)[1:])
    D = H.copy()
    D[1:] += np.cumsum(G, axis=0)[:-1]
    return D


class MeanFieldStream:
    """Streaming evaluation of the mean-field (or intermediate) opinions of every vertex

    Fed with the same signals W^(k) as the graph run, it keeps the geometric signal
    sum S_k = (1 - c - d) S_{k-1} + W^(k) and adds the precomputed community terms.
    """

    def __init__(
        self,
        model: MeanFieldModel,
        labels: IntArray,
        R0: FloatArray,
        k_max: int,
        kind: TrajectoryKind = "meanfield",
    ):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.R0 = np.asarray(R0, dtype=float)
        self.kind = kind
        self.rest = 1.0 - model.c - model.d
        self.D = deterministic_parts(
            model.matrix(kind),
            model.W_bar,
            model.R_bar,
            model.c,
            model.d,
            k_max,
        )
        self.S = np.zeros_like(self.R0)
        self.k = 0

    @property
    def value(self) -> FloatArray:
        return self.S + self.D[self.k][self.labels] + self.rest**self.k * self.R0

    def advance(self, W: FloatArray) -> FloatArray:
        if W.shape != self.R0.shape:
            raise DimensionMismatch("W", self.R0.shape, W.shape)
        self.S = self.rest * self.S + W
        self.k += 1
        out = self.value
        check_bounds(out, f"{self.kind} step {self.k}")
        return out


def _trajectory(
    kind: TrajectoryKind,
    communities: IntArray | int,
    signal_draws: FloatArray,
    matrix: FloatArray,
    W_bar: FloatArray,
    R_bar: FloatArray,
    R0: FloatArray,
    c: float,
    d: float,
    k_max: int,
    vertices: IntArray | None,
) -> MeanFieldTrajectory:
    communities = np.atleast_1d(np.asarray(communities, dtype=np.int64))
    R0 = np.atleast_2d(np.asarray(R0, dtype=float))
    signal_draws = np.asarray(signal_draws, dtype=float)
    if signal_draws.ndim == 2:
        signal_draws = signal_draws[:, None, :]
    if signal_draws.shape[0] < k_max:
        raise DimensionMismatch("signal draws", (k_max, *R0.shape), signal_draws.shape)

    D = deterministic_parts(matrix, W_bar, R_bar, c, d, k_max)
    rest = 1.0 - c - d
    values = np.empty((R0.shape[0], R0.shape[1], k_max + 1))
    values[:, :, 0] = R0
    S = np.zeros_like(R0)
    for k in range(1, k_max + 1):
        S = rest * S + signal_draws[k - 1]
        values[:, :, k] = S + D[k][communities] + rest**k * R0
        check_bounds(values[:, :, k], f"{kind} step {k}")

    return MeanFieldTrajectory(
        vertices=np.arange(R0.shape[0]) if vertices is None else np.asarray(vertices, dtype=np.int64),
        communities=communities,
        values=values,
        kind=kind,
    )


def meanfield_trajectory(
    communities: IntArray | int,
    signal_draws: FloatArray,
    M: FloatArray,
    W_bar: FloatArray,
    R_bar: FloatArray,
    R0: FloatArray,
    c: float,
    d: float,
    k_max: int,
    *,
    vertices: IntArray | None = None,
) -> MeanFieldTrajectory:
    """Mean-field opinions of vertices driven by their own signals

    ``signal_draws[k - 1]`` holds W^(k) of every vertex, shape (k_max, m, ell); a
    single vertex may pass (k_max, ell).
    """
    return _trajectory(
        "meanfield", communities, signal_draws, M, W_bar, R_bar, R0, c, d, k_max, vertices,
    )  # fmt: skip


def intermediate_trajectory(
    communities: IntArray | int,
    signal_draws: FloatArray,
    M_breve: FloatArray,
    W_breve: FloatArray,
    R_breve: FloatArray,
    R0: FloatArray,
    c: float,
    d: float,
    k_max: int,
    *,
    vertices: IntArray | None = None,
) -> MeanFieldTrajectory:
    """Intermediate opinions, through (M_tilde^s X_breve)_i = (M_breve^s x_bar)_{J_i}

    ``W_breve`` and ``R_breve`` are the K x ell community rows of the within-community
    constant matrices.
    """
    return _trajectory(
        "intermediate", communities, signal_draws, M_breve, W_breve, R_breve, R0, c, d, k_max, vertices,
    )  # fmt: skip


def stationary_horizon(tol: float, d: float, ell: int) -> int:
    """T = ceil(log(tol d / ell) / log(1 - d)), so the discarded tail ell (1 - d)^T / d is at most tol"""
    if not tol > 0:
        raise SpecError.single("tol", f"truncation tolerance must be positive, got {tol}")
    if d >= 1.0:
        return 0
    return max(0, math.ceil(math.log(tol * d / ell) / math.log(1.0 - d)))


def sample_stationary(
    r: int,
    spec: ModelSpec,
    model: MeanFieldModel,
    tol: float,
    seed: int,
    *,
    size: int | None = None,
    outer: int = 0,
    inner: int = 0,
) -> FloatArray:
    """Draws of the stationary opinion of a community-r vertex

    The vertex's own signals enter through a truncated geometric sum; the indicator
    d^- = 0 is drawn once per sample with probability P(d^- = 0 | r). Returns shape
    (ell,) or (size, ell).
    """
    T = stationary_horizon(tol, spec.d, spec.ell)
    m = 1 if size is None else int(size)
    rng = generator(seed, Purpose.STATIONARY, outer=outer, inner=inner, extra=r)

    rest = 1.0 - spec.c - spec.d
    D = deterministic_parts(model.M, model.W_bar, np.zeros_like(model.R_bar), spec.c, spec.d, T + 1)
    deterministic = D[T + 1][r]

    labels = np.full(m, r, dtype=np.int64)
    Q = spec.belief_dists[r].sample(rng, m)
    P0 = model.p_no_in_neighbors[r] if model.p_no_in_neighbors.size else 0.0
    isolated = rng.random(m) < P0
    total = np.zeros((m, spec.ell))
    for t in range(T + 1):
        Z = media_draws(spec, labels, Q, rng)
        total += rest**t * (spec.d * Z + spec.c * Q * isolated[:, None])
    out = total + deterministic
    log.debug(f"Stationary samples for community {r}: horizon {T}, {m} draws")
    return out[0] if size is None else out


def model_report(model: MeanFieldModel) -> dict[str, object]:
    """JSON-ready report of M, M_breve, W_bar, R_bar and the regime statistics"""
    report = model.to_dict()
    if model.regime is not None:
        report["threshold_flags"] = {
            "dense_threshold_ok": report["regime"]["dense_threshold_ok"],
            "clipping_active": report["regime"]["clipping_active"],
        }
    return report


def write_model_report(model: MeanFieldModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_report(model), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


__all__ = [
    "MeanFieldStream",
    "build_M",
    "build_breve_M",
    "build_model",
    "deterministic_parts",
    "intermediate_trajectory",
    "materialize_M_tilde",
    "mean_matrices",
    "meanfield_trajectory",
    "model_report",
    "p_no_in_neighbors",
    "power_stack",
    "regime_stats",
    "sample_stationary",
    "stationary_horizon",
    "weight_moments",
    "write_model_report",
]
