"""Composite capacity indices and the absorptive-capacity ranking.

Each variable is z-scored across countries (per year by default), signed by
its direction, and averaged within its capacity group; the absorptive index
is the plain mean of the six group indices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .datamodel import INDEX_CAPACITIES, Capacity, PanelDataset, Role
from .errors import IngestError, PanelValueError
from .ingest import read_rows

INDEX_COLUMNS = {
    Capacity.TECHNOLOGY: "Tech_Index",
    Capacity.FINANCIAL: "Finance_Index",
    Capacity.INFRASTRUCTURE: "Infrastructure_Index",
    Capacity.HUMAN: "HumanCapacity_Index",
    Capacity.PUBLIC_POLICY: "PublicPolicy_Index",
    Capacity.SOCIAL: "SocialCapacity_Index",
}
ABSORPTIVE_COLUMN = "AbsorptiveCapacity_Index"
RANKING_HEADER = ("Rank", "Country", *INDEX_COLUMNS.values(), ABSORPTIVE_COLUMN)


@dataclass(frozen=True)
class CapacityIndexTable:
    countries: tuple[str, ...]
    capacities: np.ndarray      # (n_countries, 6) in INDEX_CAPACITIES order
    absorptive: np.ndarray

    def __post_init__(self):
        if self.capacities.shape != (len(self.countries), len(INDEX_CAPACITIES)):
            raise PanelValueError("index table shape does not match its countries")

    def __len__(self):
        return len(self.countries)

    def row(self, country: str) -> dict[str, float]:
        i = self.countries.index(country)
        out = {INDEX_COLUMNS[c]: float(self.capacities[i, k]) for k, c in enumerate(INDEX_CAPACITIES)}
        out[ABSORPTIVE_COLUMN] = float(self.absorptive[i])
        return out


@dataclass(frozen=True)
class RankingTable:
    ranks: np.ndarray
    table: CapacityIndexTable   # rows in rank order

    def rows(self):
        for r, country, caps, a in zip(self.ranks, self.table.countries,
                                       self.table.capacities, self.table.absorptive):
            yield (int(r), country, *map(float, caps), float(a))

    def rank_of(self, country: str) -> int:
        return int(self.ranks[self.table.countries.index(country)])


def _zscores(x: np.ndarray) -> np.ndarray:
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    if not sd > 0:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def capacity_indices(completed: PanelDataset, year: int, *,
                     directions: Mapping[str, int] | None = None,
                     normalization: str = "year") -> CapacityIndexTable:
    """Six capacity indices and the absorptive index per country in ``year``.

    ``directions`` overrides the per-variable signs of the schema.
    ``normalization="pooled"`` z-scores over all country-years instead of
    within the chosen year.
    """
    if year not in completed.years:
        raise PanelValueError(f"year {year} not in the panel; available years: "
                              f"{', '.join(map(str, completed.years))}")
    if normalization not in ("year", "pooled"):
        raise PanelValueError(f"unknown normalization {normalization!r}")
    directions = dict(directions or {})
    groups: dict[Capacity, list[str]] = {c: [] for c in INDEX_CAPACITIES}
    for meta in completed.variables:
        if meta.role is Role.TARGET and meta.capacity in groups:
            groups[meta.capacity].append(meta.code)
    empty = [c.value for c, codes in groups.items() if not codes]
    if empty:
        raise PanelValueError(f"capacity groups without variables: {', '.join(empty)}")
    sel = np.array([y == year for _, y in completed.rows])
    countries = tuple(c for c, y in completed.rows if y == year)
    caps = np.zeros((len(countries), len(INDEX_CAPACITIES)))
    for k, cap in enumerate(INDEX_CAPACITIES):
        acc = np.zeros(len(countries))
        for code in groups[cap]:
            j = completed.var_index(code)
            if not completed.mask[sel if normalization == "year" else slice(None), j].all():
                raise PanelValueError(f"{code!r} has missing cells; indices need a completed dataset")
            sign = directions.get(code, completed.meta(code).direction)
            if sign not in (1, -1):
                raise PanelValueError(f"direction for {code!r} must be +1 or -1, got {sign}")
            if normalization == "year":
                z = _zscores(completed.values[sel, j])
            else:
                z = _zscores(completed.values[:, j])[sel]
            acc += sign * z
        caps[:, k] = acc / len(groups[cap])
    return CapacityIndexTable(countries, caps, caps.mean(axis=1))


def rank(table: CapacityIndexTable) -> RankingTable:
    """Rank 1 = highest absorptive index; equal values ordered by country code."""
    if len(table) == 0:
        raise PanelValueError("cannot rank an empty table")
    order = sorted(range(len(table)), key=lambda i: (-table.absorptive[i], table.countries[i]))
    ordered = CapacityIndexTable(tuple(table.countries[i] for i in order),
                                 table.capacities[order], table.absorptive[order])
    return RankingTable(np.arange(1, len(table) + 1), ordered)


def read_index_table(path) -> tuple[CapacityIndexTable, np.ndarray | None]:
    """Load a ranking-layout CSV; returns the table and its Rank column (if present)."""
    rows = read_rows(path)
    if not rows:
        raise IngestError(f"{path}: no rows")
    missing = [c for c in ("Country", *INDEX_COLUMNS.values(), ABSORPTIVE_COLUMN) if c not in rows[0]]
    if missing:
        raise IngestError(f"{path}: missing columns {missing}")
    countries, caps, absorptive, ranks = [], [], [], []
    for i, row in enumerate(rows, start=2):
        try:
            caps.append([float(row[c]) for c in INDEX_COLUMNS.values()])
            absorptive.append(float(row[ABSORPTIVE_COLUMN]))
            if "Rank" in row:
                ranks.append(int(row["Rank"]))
        except ValueError as exc:
            raise IngestError(f"{path}: {exc}", row=i) from None
        countries.append(row["Country"])
    table = CapacityIndexTable(tuple(countries), np.array(caps), np.array(absorptive))
    return table, (np.array(ranks) if "Rank" in rows[0] else None)


def ranking_rows(ranking: RankingTable) -> list:
    return list(ranking.rows())


def mean_identity_error(table: CapacityIndexTable) -> np.ndarray:
    """|absorptive - mean of the six| per row."""
    return np.abs(table.absorptive - table.capacities.mean(axis=1))
