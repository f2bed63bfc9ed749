import numpy as np
import pytest

from panelmi.datamodel import Capacity, Role, VariableMeta, from_columns
from panelmi.errors import IncompleteAuxiliary, UnimputableVariable
from panelmi.ingest import Schema
from panelmi.mice import (MiceConfig, VisitOrder, chain_rng, initialize_fill, mix_seed,
                          read_result, run_mice, visit_order, write_result)
from panelmi.pmm import MatchType, PmmSettings

from conftest import small_panel


def test_mix_seed_is_a_fixed_function():
    assert mix_seed(0, 0) == mix_seed(0, 0)
    assert len({mix_seed(7, c) for c in range(100)}) == 100
    assert mix_seed(1, 0) != mix_seed(0, 1)
    assert chain_rng(3, 2).random() == chain_rng(3, 2).random()


def test_completed_datasets_are_full_and_keep_observed_cells(panel):
    res = run_mice(panel, MiceConfig(seed=1, m=3, iterations=3))
    assert res.m == 3
    for ds in res.completed:
        assert ds.n_missing() == 0
        obs = panel.mask
        np.testing.assert_array_equal(ds.values[obs], panel.values[obs])
        for code in res.targets:
            j = panel.var_index(code)
            assert set(ds.values[~obs[:, j], j]) <= set(panel.values[obs[:, j], j])
    assert res.provenance("K0", 2010, "a") == "Observed"
    assert res.imputed.sum() == panel.n_missing()


def test_chains_are_reproducible_and_schedule_independent(panel):
    cfg = MiceConfig(seed=42, m=4, iterations=3)
    a = run_mice(panel, cfg)
    b = run_mice(panel, cfg, workers=3)
    for x, y in zip(a.completed, b.completed):
        assert x.identical(y)
    np.testing.assert_array_equal(a.traces.means, b.traces.means)
    c = run_mice(panel, cfg.replace(seed=43))
    assert not all(x.identical(y) for x, y in zip(a.completed, c.completed))


def test_chain_c_does_not_depend_on_m(panel):
    a = run_mice(panel, MiceConfig(seed=5, m=2, iterations=2))
    b = run_mice(panel, MiceConfig(seed=5, m=4, iterations=2))
    assert a.completed[1].identical(b.completed[1])


def test_trace_shapes(panel):
    res = run_mice(panel, MiceConfig(seed=1, m=2, iterations=4))
    assert res.traces.means.shape == (2, 4, 3)
    means, sds = res.traces.series("b")
    assert means.shape == (2, 4) and np.all(sds >= 0)


def test_visit_order_and_initial_fill(panel):
    order = visit_order(panel, VisitOrder.ASCENDING_MISSINGNESS)
    miss = [panel.n_missing(c) for c in order]
    assert miss == sorted(miss)
    assert list(visit_order(panel, VisitOrder.SCHEMA_ORDER)) == ["a", "b", "c"]
    filled = initialize_fill(panel, np.random.default_rng(0))
    assert filled.n_missing() == 0


def test_all_missing_target_is_unimputable():
    n = 12
    ds = from_columns(["A", "B"], range(6), {"x": np.arange(n, dtype=float), "y": np.full(n, np.nan)})
    with pytest.raises(UnimputableVariable) as err:
        run_mice(ds, MiceConfig(seed=1, m=2))
    assert err.value.code == "y"


def test_too_few_observed_rows_is_unimputable():
    ds = small_panel(miss=0.0)
    y = ds.values.copy()
    mask = ds.mask.copy()
    mask[3:, ds.var_index("b")] = False
    with pytest.raises(UnimputableVariable) as err:
        run_mice(ds.replace(values=y, mask=mask), MiceConfig(seed=1, m=2, iterations=1))
    assert err.value.code == "b" and err.value.chain == 0


def test_failure_reported_from_lowest_chain_in_parallel():
    ds = small_panel(miss=0.0)
    mask = ds.mask.copy()
    mask[3:, ds.var_index("b")] = False
    with pytest.raises(UnimputableVariable) as err:
        run_mice(ds.replace(mask=mask), MiceConfig(seed=1, m=3, iterations=1), workers=2)
    assert err.value.chain == 0


def test_incomplete_auxiliary_policy():
    ds = small_panel()
    mask = ds.mask.copy()
    mask[0, ds.var_index("z")] = False
    broken = ds.replace(mask=mask)
    with pytest.raises(IncompleteAuxiliary):
        run_mice(broken, MiceConfig(seed=1, m=2, iterations=1))
    res = run_mice(broken, MiceConfig(seed=1, m=2, iterations=1, drop_incomplete_auxiliaries=True))
    assert res.completed[0].n_missing() == 1


def test_reference_country_without_observations():
    # the first country has no observed rows for "a": its indicator block must stay full rank
    ds = small_panel(miss=0.1)
    mask = ds.mask.copy()
    mask[:6, ds.var_index("a")] = False
    res = run_mice(ds.replace(mask=mask), MiceConfig(seed=2, m=2, iterations=2))
    assert res.completed[0].n_missing() == 0


def test_predictor_override_and_match_type(panel):
    cfg = MiceConfig(seed=3, m=2, iterations=2, predictors={"a": ("z",), "b": ("a", "year")},
                     pmm=PmmSettings(k=3, match_type=MatchType.OBSERVED_HAT_MISSING_STAR),
                     country_indicators=False)
    res = run_mice(panel, cfg)
    assert res.completed[1].n_missing() == 0


def test_write_and_read_round_trip(panel, tmp_path):
    res = run_mice(panel, MiceConfig(seed=9, m=2, iterations=4))
    names = write_result(res, tmp_path)
    assert names[:2] == ["imp_001.csv", "imp_002.csv"]
    again = read_result(panel, [tmp_path / n for n in names[:2]], Schema.from_dataset(panel),
                        tmp_path / "trace.csv")
    for x, y in zip(res.completed, again.completed):
        assert x.identical(y)
    np.testing.assert_array_equal(again.traces.means, res.traces.means)
    lines = (tmp_path / "provenance.csv").read_text().splitlines()
    assert lines[0] == "country,year,variable,flag"
    assert sum(line.endswith("Imputed") for line in lines) == panel.n_missing()


def test_fully_observed_panel_gives_m_copies():
    ds = small_panel(miss=0.0)
    res = run_mice(ds, MiceConfig(seed=1, m=3))
    assert all(c.identical(ds) for c in res.completed)
    assert res.traces.variables == ()


def test_identifier_columns_untouched():
    ds = small_panel()
    metas = list(ds.variables) + [VariableMeta("code", capacity=Capacity.IDENTIFIER, role=Role.IDENTIFIER)]
    vals = np.column_stack([ds.values, np.arange(ds.n_rows)])
    mask = np.column_stack([ds.mask, np.ones(ds.n_rows, bool)])
    mask[0, -1] = False
    withid = ds.replace(values=vals, mask=mask, variables=metas)
    res = run_mice(withid, MiceConfig(seed=1, m=2, iterations=2))
    assert not res.completed[0].mask[0, -1]
