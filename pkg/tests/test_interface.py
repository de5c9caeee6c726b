import pandas as pd
import pytest

from dsbm_opinion.models import GraphSample, RegimeStats
from dsbm_opinion.models.reports import A_S_COLUMNS, ERROR_CURVE_COLUMNS, RATE_FIT_COLUMNS
from opinion_lab import OpinionLab, parse_config

SMALL = """
seed = 11

[model]
K = 2
pi = [0.5, 0.5]
kappa = [[1.0, 0.5], [0.5, 1.0]]
c = 0.5
d = 0.3
weights = { kind = "uniform", lo = 0.0, hi = 1.0 }
signals = [0.5, -0.5]

[experiment]
n_grid = [40, 80]
theta_rule = "const:6"
inner = 2
outer = 2
k_max = 4

[tree]
thetas = [2, 4]
s_values = [1]
depth = 2
vertex_count = 20
"""


@pytest.fixture(scope="module")
def lab():
    return OpinionLab(parse_config(SMALL))


def test_theta_follows_the_rule(lab):
    assert lab.theta(40) == 6.0


def test_expensive_results_are_cached(lab):
    assert lab.graph(40) is lab.graph(40)
    assert lab.labels(40) is lab.labels(40)
    assert lab.graph(40, 0, 1) is not lab.graph(40)
    assert lab.model(40) is lab.model(40)


def test_plain_results_on_request(lab):
    assert isinstance(lab.graph(40), GraphSample)
    assert isinstance(lab.regime(40, as_pandas=False), RegimeStats)


def test_single_record_is_a_series(lab):
    regime = lab.regime(40)
    assert isinstance(regime, pd.Series)
    assert regime["n"] == 40


def test_error_curve_table(lab):
    table = lab.error_curve()
    assert list(table.columns) == ERROR_CURVE_COLUMNS
    assert set(table["n"]) == {40, 80}
    assert table["k"].max() == 4


def test_rate_fits(lab):
    fits = lab.rate_fits()
    assert list(fits.columns) == RATE_FIT_COLUMNS
    assert len(fits) >= 1


def test_branching_tree_tables(lab):
    table = lab.a_s()
    assert list(table.columns) == A_S_COLUMNS
    assert set(table["theta"]) == {2.0, 4.0}
    assert set(table["s"]) == {1}


def test_horizons(lab):
    assert lab.k_max() == 4
    assert lab.k_long() >= lab.k_max()


def test_missing_concentration_setup(lab):
    from dsbm_opinion.errors import SpecError

    with pytest.raises(SpecError):
        lab.concentration()
