import math

import numpy as np
import pytest

from dsbm_opinion.errors import BudgetExceeded, DimensionMismatch, SpecError, UnknownFunction
from dsbm_opinion.metrics import (
    chaos_experiment,
    concentration_check,
    contraction_horizon,
    error_experiment,
    fit_rate,
    fit_tree_slope,
    matrix_inf_distance,
    one_step_concentration,
    parse_function,
    pick_vertices,
    ratio_bound,
    stationarity_experiment,
    sum_bound,
    tree_experiment,
)
from dsbm_opinion.graph import empirical_shares, sample_labels
from dsbm_opinion.models import ConcentrationTestCase, Mixture, PointMass, ThetaRule, Uniform
from dsbm_opinion.runner import Runner
from tests.helpers import single_community_spec, two_community_spec

spec = two_community_spec()


def test_matrix_inf_distance():
    assert matrix_inf_distance(np.zeros((3, 2)), np.zeros((3, 2))) == 0.0
    a = np.array([[0.5, -0.5], [0.1, 0.0]])
    b = np.array([[0.0, 0.0], [0.0, 0.0]])
    assert matrix_inf_distance(a, b) == pytest.approx(1.0)
    assert matrix_inf_distance(np.empty((0, 2)), np.empty((0, 2))) == 0.0
    with pytest.raises(DimensionMismatch):
        matrix_inf_distance(np.zeros((2, 2)), np.zeros((2, 3)))


def test_contraction_horizon():
    k = contraction_horizon(0.3)
    assert 0.7**k < 0.01 <= 0.7 ** (k - 1)
    assert contraction_horizon(1.0) == 1
    with pytest.raises(SpecError):
        contraction_horizon(0.0)


def test_without_network_the_error_vanishes():
    no_network = two_community_spec(c=0.0)
    curve = error_experiment(no_network, [40, 80], "const:3", 4, 3, seed=1, outer=2, intermediate=True)
    assert set(curve.norm_types) == {"inf", "row_l1", "inf_intermediate", "row_l1_intermediate"}
    for series in curve.series:
        np.testing.assert_allclose(series.estimates, 0.0, atol=1e-12)
    table = curve.to_frame()
    assert len(table) == 4 * 2 * 5


def test_error_curve_shape_and_ordering():
    curve = error_experiment(spec, [60, 120], ThetaRule("log", 2.0), 6, 3, seed=2, outer=2)
    assert curve.truncated
    for n in (60, 120):
        inf = curve.get(n, "inf")
        row = curve.get(n, "row_l1")
        assert inf.estimates.shape == (2, 7)
        np.testing.assert_allclose(inf.estimates[:, 0], 0.0)
        assert np.all(row.estimates <= inf.estimates + 1e-12)
        k_at, sup = inf.sup()
        assert sup.value >= inf.at(k_at).value - 1e-12
        assert all(sup.value >= inf.at(k).value - 1e-12 for k in range(7))
    sup_table = curve.sup_frame()
    assert set(sup_table["norm_type"]) == {"inf", "row_l1"}


def test_error_experiment_ignores_thread_count():
    one = error_experiment(spec, [50], "const:4", 3, 4, seed=3, outer=1)
    two = error_experiment(spec, [50], "const:4", 3, 4, seed=3, outer=1, runner=Runner(3, threads=2, backend="threading"))
    np.testing.assert_array_equal(one.get(50, "inf").estimates, two.get(50, "inf").estimates)


def test_error_experiment_needs_replications():
    with pytest.raises(BudgetExceeded):
        error_experiment(spec, [50], "const:4", 3, 0)
    with pytest.raises(SpecError):
        error_experiment(spec, [], "const:4", 3, 2)


def test_rate_fit_needs_two_points():
    curve = error_experiment(spec, [50, 100, 200], "const:4", 4, 2, seed=0, outer=1)
    fit = fit_rate(curve, "inf")
    assert fit.points == 3
    assert math.isfinite(fit.slope)
    single = error_experiment(spec, [50], "const:4", 4, 2, seed=0, outer=1)
    with pytest.raises(SpecError):
        fit_rate(single, "inf")


def test_test_function_family():
    V = np.array([[[0.5, -0.5], [0.2, 1.0]]])
    np.testing.assert_allclose(parse_function("const", 2, 1)(V), [1.0])
    np.testing.assert_allclose(parse_function("proj:1", 2, 1)(V), [1.0])
    np.testing.assert_allclose(parse_function("proj:0:0", 2, 1)(V), [0.5])
    np.testing.assert_allclose(parse_function("prod:0:1,1:0", 2, 1)(V), [-0.1])
    np.testing.assert_allclose(parse_function("poly:0:0:2", 2, 1)(V), [-1.0])


def test_unknown_or_out_of_range_functions():
    with pytest.raises(UnknownFunction):
        parse_function("cosine:0", 2, 1)
    with pytest.raises(UnknownFunction):
        parse_function("proj:x", 2, 1)
    with pytest.raises(SpecError):
        parse_function("proj:2", 2, 1)
    with pytest.raises(SpecError):
        parse_function("prod:0:5", 2, 1)


def test_vertex_sets_take_distinct_vertices():
    labels = np.array([1, 0, 1, 1, 0])
    np.testing.assert_array_equal(pick_vertices(labels, [1, 0, 1]), [0, 1, 2])
    with pytest.raises(SpecError):
        pick_vertices(labels, [0, 0, 0])


def test_constant_function_factorizes_exactly():
    report = chaos_experiment(spec, 60, 2, [[0, 1]], [["const", "const"]], 3, seed=0, theta=4.0, limit_replications=50)
    product = report.select("product")[0]
    assert product.graph.value == 1.0
    assert product.limit.value == 1.0
    assert product.gap == 0.0
    empirical = report.select("empirical")
    assert len(empirical) == spec.K
    assert sum(row.graph.value for row in empirical) == pytest.approx(1.0)
    assert report.to_frame().shape[0] == 1 + spec.K


def test_chaos_rejects_mismatched_sets():
    with pytest.raises(DimensionMismatch):
        chaos_experiment(spec, 60, 1, [[0, 1]], [["const"]], 2, seed=0, theta=4.0)
    with pytest.raises(SpecError):
        chaos_experiment(spec, 60, 1, [[5]], [["const"]], 2, seed=0, theta=4.0)
    with pytest.raises(SpecError):
        chaos_experiment(spec, 60, 1, [[0]], [["const"]], 2, seed=0)


def test_stationarity_rows():
    report = stationarity_experiment(spec, 80, 15, 3, 1e-3, seed=0, theta=5.0, limit_replications=40)
    assert len(report.rows) == spec.K * spec.ell * 2
    means = [row for row in report.rows if row.moment == "mean"]
    assert all(abs(row.empirical.value) <= 1.0 for row in means)
    second = [row for row in report.rows if row.moment == "second"]
    assert all(0.0 <= row.stationary.value <= 1.0 for row in second)


def test_concentration_bounds():
    assert sum_bound(0.1, 10.0, 0.0, 1.0) == 1.0
    assert ratio_bound(0.1, 10.0, 0.0, 1.0) == 1.0
    assert sum_bound(0.5, 200.0, 200.0, 1.0) < sum_bound(0.1, 200.0, 200.0, 1.0)
    assert ratio_bound(0.5, 200.0, 100.0, 1.0) == pytest.approx(4 * sum_bound(0.25, 200.0, 100.0, 1.0))


def test_zero_signal_ratio_has_no_tail():
    case = ConcentrationTestCase(N_means=(20.0,), weight_dist=Uniform(0.0, 1.0), x_dist=PointMass(0.0), eps=(0.05, 0.2))
    rows = concentration_check(case, 2000, seed=0, chunk_size=500)
    ratio = [row for row in rows if row.statistic == "ratio"]
    assert [row.empirical for row in ratio] == [0.0, 0.0]
    assert [row.statistic for row in rows] == ["ratio", "ratio", "sum", "sum"]


def test_large_poisson_sums_respect_the_bound():
    case = ConcentrationTestCase(
        N_means=(100.0, 100.0),
        weight_dist=Uniform(0.0, 1.0),
        x_dist=Uniform(-1.0, 1.0),
        eps=(0.2, 0.3),
    )
    rows = concentration_check(case, 5000, seed=1)
    for row in rows:
        assert row.reps == 5000
        assert row.passed
    informative = [row for row in rows if row.statistic == "sum"]
    assert all(row.informative for row in informative)


def test_small_sums_give_loose_bounds():
    case = ConcentrationTestCase(N_means=(2.0,), weight_dist=PointMass(1.0), x_dist=Uniform(-1.0, 1.0), eps=(0.05,))
    rows = concentration_check(case, 500, seed=2)
    assert all(row.passed for row in rows)
    assert all(not row.informative for row in rows if row.statistic == "ratio")


def test_binomial_sums_need_trial_counts():
    case = ConcentrationTestCase(N_means=(5.0,), weight_dist=PointMass(1.0), x_dist=PointMass(0.0), N_law="binomial")
    with pytest.raises(SpecError):
        concentration_check(case, 10, seed=0)
    case = ConcentrationTestCase(
        N_means=(5.0,),
        weight_dist=PointMass(1.0),
        x_dist=PointMass(0.0),
        N_law="binomial",
        N_trials=(10,),
        eps=(0.5,),
    )
    assert len(concentration_check(case, 100, seed=0)) == 2


def test_one_step_rows():
    rows = one_step_concentration(spec, 100, 3, seed=0, theta=6.0)
    assert [row.statistic for row in rows] == ["CX", "C_minus_M"]
    assert rows[0].rate == pytest.approx(math.sqrt(math.log(100) / 6.0))
    assert all(row.estimate.value >= 0 for row in rows)
    assert one_step_concentration(single_community_spec(signals=0.3, weights=1.0), 50, 2, seed=0, theta=49.0)[1].estimate.value == pytest.approx(0.0, abs=1e-12)


def test_tree_experiment_rows_and_slope():
    rows = tree_experiment(spec, [4.0, 16.0, 64.0], [1, 2], 60, seed=0, root_types=[0])
    assert len(rows) == 6
    assert all(row.estimate.reps == 60 for row in rows)
    assert all(not isinstance(row.bound, float) for row in rows if row.s == 2)
    assert all(isinstance(row.bound, float) for row in rows if row.s == 1)
    fit = fit_tree_slope(rows, 1, 0)
    assert fit.points == 3
    assert fit.slope < 0
    with pytest.raises(SpecError):
        fit_tree_slope(rows, 3, 0)


def test_dense_error_decays_at_the_fitted_rate():
    curve = error_experiment(two_community_spec(weights=1.0), [250, 500, 1000, 2000], "pow:0.8", replications=8, seed=0, outer=2)
    sups = [curve.get(n, "inf").sup()[1] for n in (250, 500, 1000, 2000)]
    assert all(later.value < earlier.value for earlier, later in zip(sups, sups[1:]))
    assert 0.6 <= fit_rate(curve, "inf").slope <= 1.4
    for n, inf in zip((250, 500, 1000, 2000), sups):
        _, row = curve.get(n, "row_l1").sup()
        assert row.value <= inf.value + 2 * inf.stderr


def test_semi_sparse_row_error_decreases_in_most_label_draws():
    rule = ThetaRule("loglog", 2 * math.e**2)
    sizes = (250, 2000, 16000)
    curve = error_experiment(two_community_spec(weights=1.0), list(sizes), rule, replications=4, seed=0, outer=3)
    per_draw = np.vstack([curve.get(n, "row_l1").estimates.max(axis=1) for n in sizes])
    decreasing = np.all(np.diff(per_draw, axis=0) < 0, axis=0)
    assert decreasing.sum() >= 2


def test_empirical_measure_of_constants_is_the_label_census():
    report = chaos_experiment(spec, 60, 2, [[0, 1]], [["const", "const"]], 3, seed=0, theta=4.0, limit_replications=50)
    shares = empirical_shares(sample_labels(spec, 60, 0, outer=0), spec.K)
    for row in report.select("empirical"):
        (r,) = row.communities
        assert row.graph.value == pytest.approx(shares[r], rel=1e-12)
        assert row.limit.value == pytest.approx(spec.pi[r], rel=1e-12)


def test_product_gap_shrinks_with_n():
    gaps = []
    for n in (500, 4000):
        report = chaos_experiment(spec, n, 2, [[0, 1]], [["proj:0", "proj:0"]], 300, 0, theta=n**0.6)
        product = report.select("product")[0]
        assert product.gap_stderr > 0
        gaps.append(abs(product.gap))
    assert gaps[1] < 0.5 * gaps[0]


def test_dense_stationary_means_agree():
    noisy = single_community_spec(signals={"kind": "uniform", "lo": -0.5, "hi": 1.0})
    k_long = contraction_horizon(noisy.d, 1e-4)
    report = stationarity_experiment(noisy, 200, k_long, 20, 1e-4, seed=0, theta=100.0, limit_replications=2000)
    means = [row for row in report.rows if row.moment == "mean"]
    assert len(means) == 1
    assert abs(means[0].gap) <= 3 * means[0].gap_stderr

    fixed = single_community_spec(signals=0.4)
    report = stationarity_experiment(fixed, 200, k_long, 5, 1e-4, seed=0, theta=100.0, limit_replications=200)
    for row in report.rows:
        if row.moment == "mean":
            assert abs(row.gap) < 1e-3
            assert row.stationary.value == pytest.approx(0.4, abs=1e-3)


@pytest.mark.parametrize("N_means", [(20.0,), (50.0,), (200.0,), (10.0, 10.0), (25.0, 25.0), (100.0, 100.0)])
def test_poisson_tails_stay_under_the_bounds(N_means):
    case = ConcentrationTestCase(
        N_means=N_means,
        weight_dist=Uniform(0.0, 1.0),
        x_dist=Uniform(-1.0, 1.0),
        eps=(0.1, 0.2, 0.3, 0.5),
    )
    rows = concentration_check(case, 20000, seed=3)
    assert len(rows) == 8
    for row in rows:
        if row.bound <= 1.0:
            assert row.empirical <= row.bound + 3 * row.stderr


def test_coin_flip_ratio_with_unit_weights():
    coin = Mixture((0.5, 0.5), [PointMass(-1.0), PointMass(1.0)])
    case = ConcentrationTestCase(N_means=(50.0,), weight_dist=PointMass(1.0), x_dist=coin, eps=(0.5,))
    rows = concentration_check(case, 20000, seed=4)
    (ratio,) = [row for row in rows if row.statistic == "ratio"]
    assert ratio.empirical < ratio.bound
    assert all(row.passed for row in rows)


def test_single_generation_error_decays_like_one_over_root_theta():
    centred = single_community_spec(signals={"kind": "uniform", "lo": -1.0, "hi": 1.0})
    rows = tree_experiment(centred, [8.0, 16.0, 32.0], [1, 3], 300, seed=0)
    assert -0.7 <= fit_tree_slope(rows, 1, 0).slope <= -0.3
    by_key = {(row.theta, row.s): row.estimate.value for row in rows}
    for theta in (8.0, 16.0, 32.0):
        assert by_key[theta, 3] <= 3.6 * by_key[theta, 1]
