import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelmi.errors import CollinearityError, InsufficientData
from panelmi.pmm import MatchType, PmmSettings, pmm_step, select_donors, standardized_design


def brute_pools(donors, recipients, k):
    kk = min(k, donors.size)
    out = []
    for r in recipients:
        d = np.abs(r - donors)
        out.append(set(np.flatnonzero(d <= np.sort(d)[kk - 1])))
    return out


values = st.lists(st.integers(-5, 5).map(float) | st.floats(-10, 10), min_size=1, max_size=30)


@given(values, values, st.integers(1, 8), st.integers(0, 1000))
def test_donor_pool_matches_brute_force(donors, recipients, k, seed):
    donors, recipients = np.array(donors), np.array(recipients)
    chosen = select_donors(donors, recipients, k, np.random.default_rng(seed))
    pools = brute_pools(donors, recipients, k)
    assert all(c in pool for c, pool in zip(chosen, pools))


def test_ties_join_the_pool_and_draw_is_uniform():
    donors = np.array([0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0])
    chosen = select_donors(donors, np.full(60_000, 1.0), 2, np.random.default_rng(1))
    counts = np.bincount(chosen, minlength=7)
    assert counts[0] == counts[6] == 0
    assert np.all(np.abs(counts[1:6] / 60_000 - 0.2) < 0.01)


def test_select_consumes_one_uniform_per_recipient():
    rng = np.random.default_rng(4)
    select_donors(np.arange(10.0), np.arange(3.0), 3, rng)
    ref = np.random.default_rng(4)
    ref.random(3)
    assert rng.bit_generator.state == ref.bit_generator.state


def test_standardized_design():
    P = np.array([[1.0, 10.0], [2.0, 10.0], [3.0, 10.0], [100.0, 3.0]])
    obs = np.array([True, True, True, False])
    X = standardized_design(P, obs)
    np.testing.assert_allclose(X[:3, 1].mean(), 0.0, atol=1e-12)
    assert np.all(X[:, 0] == 1.0)
    assert np.all(X[:, 2] == np.array([0, 0, 0, -7.0]) / 1.0)


@given(st.integers(0, 10_000), st.sampled_from(list(MatchType)), st.integers(1, 6))
def test_imputations_come_from_observed_values(seed, match, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(12, 50))
    x = rng.standard_normal((n, 2))
    y = x @ [1.0, -0.5] + rng.standard_normal(n)
    obs = rng.random(n) > 0.4
    obs[:6] = True
    obs[-1] = False
    step = pmm_step(y, obs, x, PmmSettings(k, match), rng)
    assert set(step.values.tolist()) <= set(y[obs].tolist())
    np.testing.assert_array_equal(step.rows, np.flatnonzero(~obs))
    np.testing.assert_array_equal(y[step.donors], step.values)


def test_k1_on_exact_linear_relation_picks_nearest_donor():
    x = np.arange(10.0)[:, None]
    y = 3.0 * x[:, 0] + 1.0
    obs = np.ones(10, dtype=bool)
    obs[[3, 7]] = False
    step = pmm_step(y, obs, x, PmmSettings(k=1), np.random.default_rng(0))
    # exact fit: the posterior draw equals the least-squares fit, nearest donor is a neighbour
    assert set(step.donors[:1]) <= {2, 4} and set(step.donors[1:]) <= {6, 8}


def test_fit_failures_carry_the_target():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(20)
    obs = np.ones(20, dtype=bool)
    obs[-2:] = False
    with pytest.raises(InsufficientData) as err:
        pmm_step(y, obs, rng.standard_normal((20, 17)), PmmSettings(), rng, target="v")
    assert err.value.target == "v"
    const = np.column_stack([rng.standard_normal(20), np.where(obs, 1.0, 2.0)])
    with pytest.raises(CollinearityError):
        pmm_step(y, obs, const, PmmSettings(), rng, target="v")


def test_nothing_missing_is_a_no_op():
    y = np.arange(5.0)
    step = pmm_step(y, np.ones(5, bool), np.ones((5, 1)), PmmSettings(), np.random.default_rng(0))
    assert step.rows.size == 0 and step.column_mean == 2.0
