import numpy as np
import pandas as pd
import pytest

from dsbm_opinion.dynamics import (
    check_bounds,
    closed_form_state,
    coefficient,
    coefficient_table,
    initial_opinions,
    sample_signal_frame,
    simulate,
    step,
    write_trajectories,
)
from dsbm_opinion.errors import BoundsViolation, DimensionMismatch, SpecError
from dsbm_opinion.graph import normalize_weights, sample_graph, sample_labels
from dsbm_opinion.models import OpinionState, SignalFrame
from dsbm_opinion.models.opinions import TRAJECTORY_COLUMNS
from tests.helpers import random_spec, two_community_spec

spec = two_community_spec()
labels = sample_labels(spec, 120, seed=11)
graph = sample_graph(spec, labels, 6.0, seed=11)
C = normalize_weights(graph)


def test_coefficient_values():
    assert coefficient(0, 0, 0.5, 0.3) == 1.0
    assert coefficient(1, 2, 0.5, 0.3) == pytest.approx(2 * 0.2 * 0.5)
    assert coefficient(3, 3, 0.5, 0.3) == pytest.approx(0.125)
    assert coefficient(0, 4, 0.7, 0.3) == 0.0
    with pytest.raises(SpecError):
        coefficient(3, 2, 0.5, 0.3)


def test_coefficient_columns_sum_to_one_minus_d_powers():
    table = coefficient_table(80, 0.5, 0.3)
    for t in (0, 1, 10, 60, 61, 80):
        assert table[:, t].sum() == pytest.approx(0.7**t, rel=1e-9)
    assert table[70, 75] == pytest.approx(coefficient(70, 75, 0.5, 0.3), rel=1e-9)
    assert np.all(np.triu(table.T, 1) == 0)


@pytest.mark.parametrize("c", [0.05, 0.2, 0.35, 0.5, 0.55])
@pytest.mark.parametrize("d", [0.05, 0.1, 0.2, 0.3, 0.4])
def test_coefficient_columns_are_binomial(c, d):
    table = coefficient_table(200, c, d)
    s = np.arange(201)
    for t in (1, 5, 60, 61, 200):
        column = table[:, t]
        assert column.sum() == pytest.approx((1 - d) ** t, rel=1e-9)
        assert column[1:].sum() == pytest.approx((1 - d) ** t - (1 - c - d) ** t, rel=1e-9, abs=1e-300)
        assert (s * column).sum() == pytest.approx(c * t * (1 - d) ** (t - 1), rel=1e-9)
        assert (s * (s - 1) * column).sum() == pytest.approx(c**2 * t * (t - 1) * (1 - d) ** (t - 2), rel=1e-9, abs=1e-300)


def test_initial_law_modes():
    np.testing.assert_array_equal(
        initial_opinions(two_community_spec(initial="beliefs"), graph, seed=0),
        graph.Q,
    )
    R0 = initial_opinions(spec, graph, seed=0)
    assert R0.shape == (120, 2)
    assert np.abs(R0).max() <= 1.0


def test_signals_only_carry_beliefs_for_vertices_without_in_neighbours():
    frame = sample_signal_frame(spec, graph, 1, seed=3)
    isolated = graph.no_in_neighbors
    expected = spec.d * frame.Z + spec.c * graph.Q * isolated[:, None]
    np.testing.assert_allclose(frame.W, expected)


def test_signals_can_lean_on_beliefs():
    leaning = two_community_spec(belief_weight=1.0)
    leaning_graph = sample_graph(leaning, labels, 6.0, seed=11)
    frame = sample_signal_frame(leaning, leaning_graph, 2, seed=3)
    np.testing.assert_allclose(frame.Z, leaning_graph.Q)

    half = two_community_spec(belief_weight=[0.5, 0.0])
    np.testing.assert_allclose(half.signal_means(), [[0.25, 0.25], [-0.5, -0.5]])


def test_simulation_matches_the_closed_form():
    result = simulate(spec, graph, 6, seed=5, C=C, keep_signals=True)
    for k in (0, 1, 3, 6):
        partial = simulate(spec, graph, k, seed=5, C=C, keep_signals=True)
        solved = closed_form_state(C, partial.signals, partial.R0, spec.c, spec.d, k)
        np.testing.assert_allclose(solved.R, partial.final.R, atol=1e-12)
    assert len(result.signals) == 6
    assert np.abs(result.final.R).max() <= 1.0 + 1e-12



def test_small_random_models_match_the_closed_form():
    rng = np.random.default_rng(2024)
    for i in range(50):
        small = random_spec(rng, K=int(rng.integers(1, 4)), ell=int(rng.integers(1, 4)))
        n = int(rng.integers(2, 11))
        k = int(rng.integers(1, 6))
        small_labels = sample_labels(small, n, seed=i)
        small_graph = sample_graph(small, small_labels, float(rng.uniform(0.5, n)), seed=i)
        influence = normalize_weights(small_graph)
        result = simulate(small, small_graph, k, seed=i, C=influence, keep_signals=True)
        solved = closed_form_state(influence, result.signals, result.R0, small.c, small.d, k)
        np.testing.assert_allclose(solved.R, result.final.R, atol=1e-10)

def test_simulation_is_reproducible_and_records_vertices():
    a = simulate(spec, graph, 4, seed=2, record=[0, 5, 7])
    b = simulate(spec, graph, 4, seed=2, record=[0, 5, 7])
    np.testing.assert_array_equal(a.final.R, b.final.R)
    assert a.trajectory.values.shape == (3, 2, 5)
    np.testing.assert_array_equal(a.trajectory.V(5)[:, 4], a.final.R[5])
    np.testing.assert_array_equal(a.trajectory.V(0)[:, 0], a.R0[0])


def test_independent_runs_contract():
    """Two runs sharing signals but started apart meet at rate (1 - d)^k"""
    R0 = np.ones((graph.n, spec.ell))
    high = simulate(spec, graph, 30, seed=8, C=C, R0=R0)
    low = simulate(spec, graph, 30, seed=8, C=C, R0=-R0)
    gap = np.abs(high.final.R - low.final.R).max()
    assert gap <= 2 * (1 - spec.d) ** 30 + 1e-12


def test_step_checks_shapes_and_bounds():
    state = OpinionState(R=np.zeros((graph.n, spec.ell)))
    with pytest.raises(DimensionMismatch):
        step(state, C, SignalFrame(W=np.zeros((graph.n, 1)), Z=np.zeros((graph.n, 1))), spec.c, spec.d)
    with pytest.raises(BoundsViolation):
        step(state, C, SignalFrame(W=np.full((graph.n, 2), 1.5), Z=np.zeros((graph.n, 2))), spec.c, spec.d)
    with pytest.raises(BoundsViolation):
        check_bounds(np.array([[0.0, -1.1]]), "test")


def test_trajectory_csv(tmp_path):
    records = [simulate(spec, graph, 2, seed=s, record=[1, 2], inner=s).trajectory for s in range(2)]
    path = write_trajectories(records, tmp_path / "trajectories.csv")
    table = pd.read_csv(path)
    assert list(table.columns) == TRAJECTORY_COLUMNS
    assert len(table) == 2 * 2 * 2 * 3
    assert set(table["replication"]) == {0, 1}
    assert table["value"].abs().max() <= 1.0
