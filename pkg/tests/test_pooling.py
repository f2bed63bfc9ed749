import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelmi.errors import PanelValueError
from panelmi.mice import MiceConfig, run_mice
from panelmi.pooling import mean_estimate, per_variable_fmi, pool, pooled_regress, relative_efficiency

from conftest import small_panel


def exact_rubin(q, u):
    """Rubin's rules in rational arithmetic (df and fmi computed from exact r)."""
    m = len(q)
    q = [Fraction(x) for x in q]
    u = [Fraction(x) for x in u]
    qb = sum(q) / m
    ub = sum(u) / m
    b = sum((x - qb) ** 2 for x in q) / (m - 1)
    t = ub + (1 + Fraction(1, m)) * b
    r = (1 + Fraction(1, m)) * b / ub
    df = (m - 1) * (1 + 1 / r) ** 2
    lam = (1 + Fraction(1, m)) * b / t
    fmi = (r + 2 / (df + 3)) / (r + 1)
    return dict(q_bar=qb, u_bar=ub, b=b, t=t, r=r, df=df, lam=lam, fmi=fmi,
                re=1 / (1 + fmi / m))


def test_hand_example():
    est = pool([(1.0, 0.04), (1.2, 0.05), (1.1, 0.045)])
    exact = exact_rubin(["1.0", "1.2", "1.1"], ["0.04", "0.05", "0.045"])
    for name, value in exact.items():
        assert getattr(est, name) == pytest.approx(float(value), abs=1e-12)
    assert est.b == pytest.approx(0.01)
    assert est.df == pytest.approx(38.28125)


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(0.001, 10)), min_size=2, max_size=12))
def test_matches_rational_oracle(pairs):
    q = [p[0] for p in pairs]
    if np.ptp(q) < 1e-6:
        return
    est = pool(pairs)
    exact = exact_rubin(q, [p[1] for p in pairs])
    for name, value in exact.items():
        assert getattr(est, name) == pytest.approx(float(value), rel=1e-9, abs=1e-12)
    assert 0 <= est.fmi <= 1 and est.t >= est.u_bar


def test_degenerate_between_variance():
    est = pool([(2.0, 0.1)] * 5)
    assert est.b == 0 and est.fmi == 0 and est.re == 1.0 and math.isinf(est.df)
    assert est.t == 0.1


def test_zero_within_variance():
    est = pool([(1.0, 0.0), (2.0, 0.0)])
    assert est.fmi == 1.0 and math.isinf(est.r) and est.df == 1.0


def test_invalid_inputs():
    with pytest.raises(PanelValueError):
        pool([(1.0, 0.1)])
    with pytest.raises(PanelValueError):
        pool([(1.0, -0.1), (1.0, 0.1)])


def test_relative_efficiency_bound():
    for fmi in np.linspace(0, 1, 11):
        assert relative_efficiency(fmi, 50) >= 1 / 1.02 - 1e-15


def test_mean_estimate():
    q, u = mean_estimate(np.array([1.0, 2.0, 3.0, 4.0]))
    assert q == 2.5 and u == pytest.approx(np.var([1, 2, 3, 4], ddof=1) / 4)


def test_pooled_regression_matches_manual():
    ds = small_panel(seed=4)
    res = run_mice(ds, MiceConfig(seed=2, m=3, iterations=3))
    out = dict(pooled_regress(res, "a", ["b", "z"]))
    assert list(out) == ["(intercept)", "b", "z"]
    qs = []
    for c in res.completed:
        X = np.column_stack([np.ones(c.n_rows), c.column("b"), c.column("z")])
        beta, *_ = np.linalg.lstsq(X, c.column("a"), rcond=None)
        qs.append(beta[1])
    assert out["b"].q_bar == pytest.approx(np.mean(qs), rel=1e-9)
    fmi = per_variable_fmi(res, "a")
    assert 0 <= fmi.fmi <= 1
