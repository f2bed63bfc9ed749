import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelmi.baselines import (AmputationPlan, DeletedTruth, ampute, evaluate, listwise_delete,
                               logistic_intercept, mean_substitute, regression_impute)
from panelmi.errors import PanelValueError, ShapeMismatchError
from panelmi.synth import correlated_panel, equicorrelation


@pytest.fixture(scope="module")
def truth():
    return correlated_panel(0, 20_000, equicorrelation(3, 0.5), codes=("x", "y", "w"))


def test_mcar_rate(truth):
    amputed, deleted = ampute(truth, AmputationPlan("MCAR", 0.3, ("y",), seed=1))
    frac = amputed.n_missing("y") / truth.n_rows
    assert abs(frac - 0.3) < 0.01
    assert amputed.n_missing("x") == 0
    rows, vals = deleted.for_code("y")
    np.testing.assert_array_equal(vals, truth.values[rows, truth.var_index("y")])


@pytest.mark.parametrize("mech", ["MAR", "MNAR"])
def test_selective_mechanisms_hit_the_rate_and_bias_the_observed_mean(truth, mech):
    plan = AmputationPlan(mech, 0.4, ("y",), seed=2, driver="x" if mech == "MAR" else None)
    amputed, _ = ampute(truth, plan)
    assert abs(amputed.n_missing("y") / truth.n_rows - 0.4) < 0.015
    # high driver values are deleted more often
    assert amputed.observed_values("y").mean() < truth.observed_values("y").mean() - 0.1


@given(st.integers(0, 1000), st.floats(0.05, 0.95))
def test_logistic_intercept_hits_rate(seed, rate):
    z = np.random.default_rng(seed).standard_normal(500)
    a = logistic_intercept(z, rate)
    assert abs(np.mean(1 / (1 + np.exp(-(a + 2 * z)))) - rate) < 1e-4


def test_plan_validation():
    with pytest.raises(PanelValueError):
        AmputationPlan("MCAR", 1.2, ("y",), seed=1)
    with pytest.raises(PanelValueError):
        AmputationPlan("MAR", 0.2, ("y",), seed=1)
    with pytest.raises(PanelValueError):
        AmputationPlan("MAR", 0.2, ("y",), seed=1, driver="y")
    with pytest.raises(PanelValueError):
        AmputationPlan("sometimes", 0.2, ("y",), seed=1)


def test_seeded_amputation_is_reproducible(truth):
    plan = AmputationPlan("MCAR", 0.2, ("y", "w"), seed=5)
    a, _ = ampute(truth, plan)
    b, _ = ampute(truth, plan)
    assert a.identical(b)


def test_comparators(truth):
    amputed, deleted = ampute(truth, AmputationPlan("MCAR", 0.3, ("y",), seed=3))
    lw = listwise_delete(amputed)
    assert lw.n_missing() == 0 and lw.n_rows == truth.n_rows - amputed.n_missing()
    ms = mean_substitute(amputed)
    rows, _ = deleted.for_code("y")
    assert np.all(ms.values[rows, 1] == amputed.observed_values("y").mean())
    reg = regression_impute(amputed)
    assert reg.n_missing() == 0
    m_ms = evaluate(truth, deleted, ms)["y"]
    m_reg = evaluate(truth, deleted, reg)["y"]
    assert m_reg.corr_distortion < m_ms.corr_distortion


def test_evaluate_truth_itself(truth):
    amputed, deleted = ampute(truth, AmputationPlan("MCAR", 0.3, ("y",), seed=3))
    m = evaluate(truth, deleted, truth)["y"]
    assert m.bias == 0 and m.ks == 0 and m.corr_distortion == 0


def test_evaluate_shape_mismatch(truth):
    amputed, deleted = ampute(truth, AmputationPlan("MCAR", 0.3, ("y",), seed=3))
    with pytest.raises(ShapeMismatchError):
        evaluate(truth, deleted, mean_substitute(amputed).select_variables(["x", "y"]))
    with pytest.raises(ShapeMismatchError):
        DeletedTruth.between(truth, amputed.select_rows(range(10)))
