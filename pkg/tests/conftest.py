from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from panelmi.datamodel import Capacity, Role, VariableMeta, from_columns

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"

# filled by the acceptance suite, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def small_panel(seed=0, n_countries=6, years=range(2010, 2016), miss=0.3, with_aux=True):
    """Correlated 3-target panel with MCAR holes, plus one complete auxiliary."""
    rng = np.random.default_rng(seed)
    n = n_countries * len(years)
    f = rng.standard_normal(n)
    cols = {
        "a": 2.0 + f + 0.3 * rng.standard_normal(n),
        "b": np.exp(0.5 * f + 0.3 * rng.standard_normal(n)),
        "c": -f + 0.5 * rng.standard_normal(n),
    }
    metas = {
        "a": VariableMeta("a", capacity=Capacity.TECHNOLOGY),
        "b": VariableMeta("b", capacity=Capacity.FINANCIAL),
        "c": VariableMeta("c", capacity=Capacity.HUMAN, direction=-1),
    }
    for code in ("a", "b", "c"):
        hole = rng.random(n) < miss
        hole[0] = False
        cols[code][hole] = np.nan
    if with_aux:
        cols["z"] = f + 0.2 * rng.standard_normal(n)
        metas["z"] = VariableMeta("z", capacity=Capacity.AUXILIARY, role=Role.AUXILIARY)
    countries = [f"K{i}" for i in range(n_countries)]
    return from_columns(countries, list(years), cols, metas)


@pytest.fixture
def panel():
    return small_panel()
