import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import gaussian_kde, norm

from panelmi.datamodel import from_columns
from panelmi.diagnostics import (Describe, DescriptiveRow, comparison_index, corr_compare, kde,
                                 ovl, pairwise_complete_corr, silverman_bandwidth, split_rhat)
from panelmi.errors import PanelValueError


def test_silverman_by_hand():
    x = np.array([1.0, 2.0, 4.0, 7.0, 11.0, 16.0])
    sd = np.std(x, ddof=1)
    iqr = np.percentile(x, 75) - np.percentile(x, 25)
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 6 ** -0.2)
    # zero IQR falls back to the sd
    y = np.array([0.0] * 10 + [1.0])
    assert silverman_bandwidth(y) == pytest.approx(0.9 * np.std(y, ddof=1) * 11 ** -0.2)
    with pytest.raises(PanelValueError):
        silverman_bandwidth([3.0, 3.0])


def test_kde_matches_scipy():
    x = np.random.default_rng(0).lognormal(size=200)
    d = kde(x)
    ref = gaussian_kde(x, bw_method=d.bandwidth / np.std(x, ddof=1))
    np.testing.assert_allclose(d.density, ref(d.grid), rtol=1e-10, atol=1e-14)
    assert d.grid.size == 512
    assert d.grid[0] == pytest.approx(x.min() - 3 * d.bandwidth)


@given(st.integers(0, 10_000), st.integers(20, 400))
def test_kde_mass_near_one_for_continuous_samples(seed, n):
    x = np.random.default_rng(seed).standard_normal(n)
    assert kde(x).mass() == pytest.approx(1.0, abs=1e-3)


def test_ovl_properties():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal(4000), rng.standard_normal(4000) + 1.0
    da, db = kde(a), kde(b)
    assert ovl(da, da) == pytest.approx(1.0, abs=2e-3)
    assert ovl(da, db) == pytest.approx(ovl(db, da))
    # two unit normals one sd apart overlap by 2 Phi(-1/2)
    assert ovl(da, db) == pytest.approx(2 * norm.cdf(-0.5), abs=0.03)
    far = kde(rng.standard_normal(500) + 50)
    assert ovl(da, far) < 1e-6


def test_split_rhat():
    assert split_rhat(np.full((3, 10), 2.5)) == 1.0
    stationary = np.random.default_rng(9).standard_normal((5, 200))
    assert split_rhat(stationary) < 1.05
    drift = np.array([np.linspace(0, 10, 10) + c for c in range(4)])
    assert split_rhat(drift) > 1.2
    with pytest.raises(PanelValueError):
        split_rhat(np.zeros((3, 6)))
    with pytest.raises(PanelValueError):
        split_rhat(np.zeros((1, 10)))


def test_split_rhat_by_hand():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 12))
    kept = x[:, 6:]
    halves = np.vstack([kept[:, :3], kept[:, 3:]])
    n = 3
    w = halves.var(axis=1, ddof=1).mean()
    b = n * halves.mean(axis=1).var(ddof=1)
    expected = math.sqrt(((n - 1) / n * w + b / n) / w)
    assert split_rhat(x) == pytest.approx(expected)


def test_pairwise_correlation_matches_corrcoef():
    rng = np.random.default_rng(3)
    v = rng.standard_normal((50, 3))
    mask = rng.random((50, 3)) > 0.2
    corr, avail = pairwise_complete_corr(v, mask)
    both = mask[:, 0] & mask[:, 2]
    assert corr[0, 2] == pytest.approx(np.corrcoef(v[both, 0], v[both, 2])[0, 1])
    assert avail.all()


def test_corr_compare_counts_sign_flips():
    n = 40
    x = np.linspace(-1, 1, n)
    obs = from_columns(["A"], range(n), {"x": x, "y": x + 0.01 * np.cos(np.arange(n))})
    comp = obs.replace(values=np.column_stack([x, -x]))
    cmp = corr_compare(obs, comp)
    assert cmp.sign_flips == 1 and cmp.max_abs_diff == pytest.approx(2.0, abs=1e-3)
    layered = cmp.layered()
    assert layered[0, 1] > 0 > layered[1, 0]


def test_descriptive_row():
    row = DescriptiveRow("v", Describe.of(np.array([1.0, 2, 3, 6])), Describe.of(np.array([1.0, 2, 3])), 0.25)
    assert row.mean_diff == pytest.approx(1.0)
    assert row.sd_ratio == pytest.approx(np.std([1, 2, 3, 6], ddof=1) / 1.0)


def test_comparison_index():
    assert [comparison_index(m) for m in (1, 2, 5, 50)] == [0, 0, 2, 24]
