import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import FIXTURES
from panelmi.datamodel import INDEX_CAPACITIES, VariableMeta, from_columns
from panelmi.errors import PanelValueError
from panelmi.indices import (ABSORPTIVE_COLUMN, CapacityIndexTable, capacity_indices,
                             mean_identity_error, rank, read_index_table)


def index_panel(seed=0, n_countries=7, years=(2018, 2019), per_group=2, directions=None):
    rng = np.random.default_rng(seed)
    n = n_countries * len(years)
    cols, metas = {}, {}
    for cap in INDEX_CAPACITIES:
        for k in range(per_group):
            code = f"{cap.value[:4].lower()}{k}"
            cols[code] = rng.lognormal(size=n)
            metas[code] = VariableMeta(code, capacity=cap,
                                       direction=(directions or {}).get(code, 1))
    return from_columns([f"P{i}" for i in range(n_countries)], list(years), cols, metas)


def test_hand_computed_index():
    ds = index_panel()
    t = capacity_indices(ds, 2019)
    sel = np.array([y == 2019 for _, y in ds.rows])
    z = lambda x: (x - x.mean()) / x.std(ddof=1)
    tech = (z(ds.values[sel, 0]) + z(ds.values[sel, 1])) / 2
    np.testing.assert_allclose(t.capacities[:, 0], tech)
    assert t.countries == tuple(f"P{i}" for i in range(7))
    assert mean_identity_error(t).max() < 1e-12


@given(st.integers(0, 500), st.floats(0.1, 50), st.floats(-100, 100))
def test_positive_affine_rescaling_leaves_indices_unchanged(seed, a, b):
    ds = index_panel(seed)
    moved = ds.replace(values=ds.values * a + b)
    np.testing.assert_allclose(capacity_indices(moved, 2018).absorptive,
                               capacity_indices(ds, 2018).absorptive, atol=1e-9)


def test_direction_flip_negates_the_contribution():
    ds = index_panel()
    base = capacity_indices(ds, 2019)
    flipped = capacity_indices(ds, 2019, directions={"tech0": -1, "tech1": -1})
    np.testing.assert_allclose(flipped.capacities[:, 0], -base.capacities[:, 0])
    np.testing.assert_allclose(flipped.capacities[:, 1:], base.capacities[:, 1:])
    with pytest.raises(PanelValueError):
        capacity_indices(ds, 2019, directions={"tech0": 2})


def test_country_order_does_not_change_scores():
    ds = index_panel()
    perm = np.random.default_rng(1).permutation(ds.n_rows)
    shuffled = ds.select_rows(perm)
    a, b = capacity_indices(ds, 2019), capacity_indices(shuffled, 2019)
    for c in a.countries:
        assert a.row(c) == pytest.approx(b.row(c))


def test_zero_variance_variable_contributes_zero():
    ds = index_panel()
    v = ds.values.copy()
    v[:, 0] = 3.0
    t = capacity_indices(ds.replace(values=v), 2019)
    sel = np.array([y == 2019 for _, y in ds.rows])
    x = ds.values[sel, 1]
    np.testing.assert_allclose(t.capacities[:, 0], (x - x.mean()) / x.std(ddof=1) / 2)


def test_pooled_normalization_differs_from_per_year():
    ds = index_panel()
    assert not np.allclose(capacity_indices(ds, 2019, normalization="pooled").absorptive,
                           capacity_indices(ds, 2019).absorptive)


def test_errors():
    ds = index_panel()
    with pytest.raises(PanelValueError, match="2018, 2019"):
        capacity_indices(ds, 2030)
    with pytest.raises(PanelValueError, match="Social"):
        capacity_indices(ds.select_variables([c for c in ds.codes if not c.startswith("soci")]), 2019)
    holes = ds.mask.copy()
    holes[-1, 0] = False
    with pytest.raises(PanelValueError, match="missing"):
        capacity_indices(ds.replace(mask=holes), 2019)
    with pytest.raises(PanelValueError):
        capacity_indices(ds, 2019, normalization="global")


def test_single_country_scores_zero():
    t = capacity_indices(index_panel(n_countries=1), 2019)
    assert t.absorptive.tolist() == [0.0]
    assert rank(t).rank_of("P0") == 1


def test_rank_ties_break_by_country():
    caps = np.zeros((3, 6))
    t = CapacityIndexTable(("Zeta", "Alpha", "Mid"), caps, np.array([1.0, 1.0, 2.0]))
    r = rank(t)
    assert r.table.countries == ("Mid", "Alpha", "Zeta")
    assert r.ranks.tolist() == [1, 2, 3]


def test_fixture_table_ranks_reproduce():
    table, ranks = read_index_table(FIXTURES / "absorptive_ranking_2019.csv")
    assert len(table) == 82
    r = rank(table)
    assert [r.rank_of(c) for c in table.countries] == ranks.tolist()
    assert table.row(table.countries[0])[ABSORPTIVE_COLUMN] == table.absorptive[0]
