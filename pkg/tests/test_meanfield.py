import json
import math

import numpy as np
import pytest

from dsbm_opinion.dynamics import closed_form_state, simulate
from dsbm_opinion.errors import BoundsViolation, SpecError
from dsbm_opinion.graph import fixed_composition, normalize_weights, sample_graph, sample_labels
from dsbm_opinion.meanfield import (
    MeanFieldStream,
    build_breve_M,
    build_M,
    build_model,
    deterministic_parts,
    intermediate_trajectory,
    materialize_M_tilde,
    mean_matrices,
    meanfield_trajectory,
    model_report,
    regime_stats,
    sample_stationary,
    stationary_horizon,
    weight_moments,
)
from dsbm_opinion.metrics import matrix_inf_distance
from dsbm_opinion.types import Unset
from tests.helpers import random_spec, single_community_spec, two_community_spec


def test_build_M_examples():
    np.testing.assert_allclose(build_M(np.array([1.0]), np.array([[3.0]]), np.array([[0.5]])), [[1.0]])
    M = build_M(np.array([0.5, 0.5]), np.array([[2.0, 1.0], [1.0, 2.0]]), np.ones((2, 2)))
    np.testing.assert_allclose(M, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]])


def test_bot_community_has_a_zero_row():
    # nobody speaks to community 1
    kappa = np.array([[1.0, 0.0], [1.0, 0.0]])
    M = build_M(np.array([0.5, 0.5]), kappa, np.ones((2, 2)))
    np.testing.assert_array_equal(M[1], 0.0)
    np.testing.assert_allclose(M[0].sum(), 1.0)
    breve = build_breve_M(np.array([0.7, 0.3]), kappa, np.ones((2, 2)))
    np.testing.assert_array_equal(breve.sum(axis=1) > 0, M.sum(axis=1) > 0)


def test_breve_M_moves_by_at_most_E_n():
    rng = np.random.default_rng(0)
    for _ in range(20):
        spec = random_spec(rng)
        labels = sample_labels(spec, 40, seed=int(rng.integers(1000)))
        if np.bincount(labels, minlength=spec.K).min() == 0:
            continue
        model = build_model(spec, 40, 5.0, labels=labels)
        E_n = model.regime.E_n
        gap = np.abs(model.M_breve - model.M).sum(axis=1).max()
        assert gap <= E_n + 1e-12
        for s in (2, 3, 5):
            power_gap = np.abs(np.linalg.matrix_power(model.M_breve, s) - np.linalg.matrix_power(model.M, s))
            assert power_gap.sum(axis=1).max() <= s * gap + 1e-12
        rows = np.linalg.matrix_power(model.M, 7).sum(axis=1)
        np.testing.assert_allclose(rows[rows > 0], 1.0, atol=1e-10)


def test_intermediate_stays_within_E_n_of_meanfield():
    rng = np.random.default_rng(1)
    for _ in range(20):
        spec = random_spec(rng)
        n, k_max = 30, 25
        labels = sample_labels(spec, n, seed=int(rng.integers(1000)))
        if np.bincount(labels, minlength=spec.K).min() == 0:
            continue
        model = build_model(spec, n, 4.0, labels=labels)
        signals = rng.uniform(-spec.d, spec.d, size=(k_max, n, spec.ell))
        R0 = rng.uniform(-1.0, 1.0, size=(n, spec.ell))
        shared = (model.W_bar, model.R_bar, R0, spec.c, spec.d, k_max)
        mf = meanfield_trajectory(labels, signals, model.M, *shared)
        im = intermediate_trajectory(labels, signals, model.M_breve, *shared)
        worst = max(matrix_inf_distance(mf.at(k), im.at(k)) for k in range(k_max + 1))
        assert worst <= spec.ell * spec.c / spec.d**2 * model.regime.E_n + 1e-12


def test_exact_shares_make_intermediate_equal_meanfield():
    spec = two_community_spec()
    labels = np.repeat([0, 1], fixed_composition(spec.pi, 10))
    model = build_model(spec, 10, 3.0, labels=labels)
    assert model.regime.E_n == 0.0
    np.testing.assert_allclose(model.M_breve, model.M)


def test_E_n_hand_example():
    spec = two_community_spec()
    stats = regime_stats(spec, np.array([0.6, 0.4]), 100, 10.0)
    assert stats.E_n == pytest.approx(0.5)


def test_point_mass_weights_regime():
    spec = single_community_spec(weights=1.0, kappa=[[2.0]])
    stats = regime_stats(spec, np.array([1.0]), 100, 10.0)
    np.testing.assert_allclose(stats.mu, [2.0])
    assert stats.Delta == pytest.approx(0.5)
    assert stats.Lambda == pytest.approx(1.0)
    assert stats.threshold == pytest.approx(36 * 0.5 * math.log(100))
    assert stats.dense_threshold_ok is False


def test_regime_without_nonzero_rows():
    spec = single_community_spec(kappa=[[0.0]])
    stats = regime_stats(spec, np.array([1.0]), 100, 10.0)
    assert isinstance(stats.Delta, Unset)
    assert isinstance(stats.dense_threshold_ok, Unset)
    assert stats.to_dict()["Delta"] is None


def test_row_identity_against_dense_M_tilde():
    spec = two_community_spec()
    labels = np.array([0, 1, 1, 0, 1, 1])
    model = build_model(spec, 6, 2.0, labels=labels)
    pi_hat = np.bincount(labels) / 6
    M_tilde = materialize_M_tilde(labels, model.M_breve, pi_hat)
    x = np.array([[0.3, -0.2], [0.9, 0.1]])
    for s in (1, 2, 3):
        lhs = np.linalg.matrix_power(M_tilde, s) @ x[labels]
        rhs = (np.linalg.matrix_power(model.M_breve, s) @ x)[labels]
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_isolation_probability_is_exact_binomial():
    spec = single_community_spec(signals=0.4, beliefs=0.2)
    theta = math.log(100)
    W_bar, R_bar, P0 = mean_matrices(spec, 100, theta)
    expected = (1 - theta / 100) ** 99
    assert P0[0] == pytest.approx(expected)
    assert W_bar[0, 0] == pytest.approx(spec.d * 0.4 + spec.c * 0.2 * expected)
    np.testing.assert_array_equal(R_bar, [[0.0]])


def test_no_edges_means_every_vertex_is_isolated():
    spec = single_community_spec(kappa=[[0.0]], signals=0.4, beliefs=0.2)
    W_bar, _, P0 = mean_matrices(spec, 50, 3.0)
    assert P0[0] == 1.0
    assert W_bar[0, 0] == pytest.approx(spec.d * 0.4 + spec.c * 0.2)


def test_first_meanfield_steps():
    spec = two_community_spec(initial="beliefs", beliefs=0.5)
    model = build_model(spec, 100, 5.0)
    W1 = np.array([[0.1, -0.2]])
    R0 = np.array([[0.5, 0.5]])
    trajectory = meanfield_trajectory(1, W1, model.M, model.W_bar, model.R_bar, R0, spec.c, spec.d, 1)
    np.testing.assert_allclose(trajectory.at(0), R0)
    expected = W1[0] + spec.c * (model.M @ model.R_bar)[1] + (1 - spec.c - spec.d) * R0[0]
    np.testing.assert_allclose(trajectory.at(1)[0], expected)
    np.testing.assert_array_equal(deterministic_parts(model.M, model.W_bar, model.R_bar, spec.c, spec.d, 4)[0], 0.0)


def test_no_network_term_matches_graph_closed_form():
    spec = two_community_spec(c=0.0)
    labels = sample_labels(spec, 50, seed=3)
    graph = sample_graph(spec, labels, 4.0, seed=3)
    result = simulate(spec, graph, 5, seed=3, keep_signals=True)
    model = build_model(spec, 50, 4.0, graph=graph)
    mf = meanfield_trajectory(labels, np.stack(result.signals), model.M, model.W_bar, model.R_bar, result.R0, 0.0, spec.d, 5)
    solved = closed_form_state(normalize_weights(graph), result.signals, result.R0, 0.0, spec.d, 5)
    np.testing.assert_allclose(mf.at(5), solved.R, atol=1e-12)


def test_stream_follows_the_batch_trajectory():
    spec = two_community_spec(initial="beliefs")
    labels = sample_labels(spec, 20, seed=1)
    model = build_model(spec, 20, 3.0, labels=labels)
    rng = np.random.default_rng(2)
    signals = rng.uniform(-0.3, 0.3, size=(6, 20, 2))
    R0 = rng.uniform(-1, 1, size=(20, 2))
    batch = meanfield_trajectory(labels, signals, model.M, model.W_bar, model.R_bar, R0, spec.c, spec.d, 6)
    stream = MeanFieldStream(model, labels, R0, 6)
    np.testing.assert_allclose(stream.value, R0)
    for k in range(1, 7):
        np.testing.assert_allclose(stream.advance(signals[k - 1]), batch.at(k), atol=1e-12)


def test_stationary_horizon_controls_the_tail():
    for tol, d, ell in ((1e-4, 0.3, 2), (1e-10, 0.2, 1), (0.5, 0.9, 3)):
        T = stationary_horizon(tol, d, ell)
        assert ell * (1 - d) ** T / d <= tol
        assert T == max(0, math.ceil(math.log(tol * d / ell) / math.log(1 - d)))
    with pytest.raises(SpecError):
        stationary_horizon(0.0, 0.3, 1)


def test_stationary_limit_of_pure_media_is_the_signal():
    spec = single_community_spec(c=0.0, d=0.3, signals=0.4)
    model = build_model(spec, 100, 5.0)
    draws = sample_stationary(0, spec, model, 1e-6, seed=0, size=5)
    np.testing.assert_allclose(draws, 0.4, atol=1e-6)


def test_stationary_limit_of_deterministic_signals_matches_a_long_run():
    spec = single_community_spec(c=0.4, d=0.2, signals=0.5, weights=1.0)
    model = build_model(spec, 200, 20.0)
    limit = sample_stationary(0, spec, model, 1e-9, seed=0)
    labels = sample_labels(spec, 200, seed=0)
    graph = sample_graph(spec, labels, 20.0, seed=0)
    R = simulate(spec, graph, 200, seed=0).final.R
    connected = ~graph.no_in_neighbors
    np.testing.assert_allclose(R[connected], limit[0], atol=1e-8)


def test_model_report_is_json_ready():
    spec = two_community_spec()
    report = model_report(build_model(spec, 100, 5.0))
    text = json.dumps(report)
    assert "M_breve" in report
    assert "threshold_flags" in json.loads(text)


def test_plugin_moments_come_from_the_realized_weights():
    fixed = two_community_spec(moments="plugin", weights=0.4)
    graph = sample_graph(fixed, sample_labels(fixed, 200, seed=2), 10.0, seed=2)
    beta, v = weight_moments(fixed, graph)
    np.testing.assert_allclose(beta, 0.4)
    np.testing.assert_allclose(v, 0.16)

    uniform = two_community_spec(moments="plugin")
    graph = sample_graph(uniform, sample_labels(uniform, 2000, seed=4), 20.0, seed=4)
    beta, v = weight_moments(uniform, graph)
    np.testing.assert_allclose(beta, 0.5, atol=0.03)
    np.testing.assert_allclose(v, 1 / 3, atol=0.03)

    analytic_beta, _ = weight_moments(two_community_spec(), graph)
    np.testing.assert_allclose(analytic_beta, 0.5)


def test_signals_outside_the_cube_are_rejected():
    spec = two_community_spec()
    model = build_model(spec, 100, 5.0)
    W = np.array([[[2.0, 0.0]]])
    R0 = np.zeros((1, 2))
    with pytest.raises(BoundsViolation):
        meanfield_trajectory(0, W, model.M, model.W_bar, model.R_bar, R0, spec.c, spec.d, 1)
