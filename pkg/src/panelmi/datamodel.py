"""Country x year x variable panel with an explicit observation mask.

Values live in a dense ``(n_rows, n_variables)`` float64 array whose rows are
(country, year) pairs. Missing cells are defined by ``mask`` alone; the value
stored under a false mask bit is 0.0 and must never be read.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DuplicateCellError, PanelValueError, UnknownCodeError


class Capacity(str, enum.Enum):
    TECHNOLOGY = "Technology"
    FINANCIAL = "Financial"
    HUMAN = "Human"
    INFRASTRUCTURE = "Infrastructure"
    PUBLIC_POLICY = "PublicPolicy"
    SOCIAL = "Social"
    AUXILIARY = "Auxiliary"
    IDENTIFIER = "Identifier"

    @classmethod
    def parse(cls, text: str) -> "Capacity":
        key = text.strip().replace(" ", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key or member.name.replace("_", "").lower() == key:
                return member
        raise PanelValueError(f"unknown capacity group {text!r}")


# the six groups that feed the composite indices, in ranking-table order
INDEX_CAPACITIES = (
    Capacity.TECHNOLOGY,
    Capacity.FINANCIAL,
    Capacity.INFRASTRUCTURE,
    Capacity.HUMAN,
    Capacity.PUBLIC_POLICY,
    Capacity.SOCIAL,
)


class Role(str, enum.Enum):
    TARGET = "target"
    AUXILIARY = "auxiliary"
    IDENTIFIER = "identifier"

    @classmethod
    def parse(cls, text: str) -> "Role":
        key = text.strip().lower().replace("_", "-")
        aliases = {
            "target": cls.TARGET,
            "imputation-target": cls.TARGET,
            "auxiliary": cls.AUXILIARY,
            "auxiliary-predictor": cls.AUXILIARY,
            "identifier": cls.IDENTIFIER,
        }
        try:
            return aliases[key]
        except KeyError:
            raise PanelValueError(f"unknown variable role {text!r}") from None


@dataclass(frozen=True)
class VariableMeta:
    code: str
    label: str = ""
    capacity: Capacity = Capacity.AUXILIARY
    direction: int = 1
    role: Role = Role.TARGET

    def __post_init__(self):
        if not self.code:
            raise PanelValueError("variable code must be non-empty")
        if self.direction not in (1, -1):
            raise PanelValueError(f"{self.code}: direction must be +1 or -1, got {self.direction}")
        if self.role is Role.TARGET and self.capacity is Capacity.IDENTIFIER:
            raise PanelValueError(f"{self.code}: identifiers are never imputation targets")


@dataclass(frozen=True)
class VariableProfile:
    code: str
    observed: int
    missing: int

    @property
    def total(self) -> int:
        return self.observed + self.missing

    @property
    def fraction(self) -> float:
        return self.missing / self.total if self.total else 0.0

    @property
    def percent(self) -> float:
        return 100.0 * self.fraction


@dataclass(frozen=True)
class MissingProfile:
    variables: tuple[VariableProfile, ...]

    def __getitem__(self, code: str) -> VariableProfile:
        for v in self.variables:
            if v.code == code:
                return v
        raise UnknownCodeError(f"unknown variable code {code!r}")

    def __iter__(self):
        return iter(self.variables)

    def __len__(self):
        return len(self.variables)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Immutable panel; build with :func:`build_panel` or :meth:`from_arrays`.

    ``rows`` lists the (country, year) key of each row. Panels produced by
    :func:`build_panel` and the CSV readers are rectangular (every
    country x year pair present, country-major order); row subsets such as
    the listwise-deletion output keep their original row order.
    """

    rows: tuple[tuple[str, int], ...]
    variables: tuple[VariableMeta, ...]
    values: np.ndarray
    mask: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        mask = np.array(self.mask, dtype=bool, copy=True)
        shape = (len(self.rows), len(self.variables))
        if values.shape != shape or mask.shape != shape:
            raise PanelValueError(
                f"values/mask shape {values.shape}/{mask.shape} does not match {shape}")
        codes = [v.code for v in self.variables]
        if len(set(codes)) != len(codes):
            dup = sorted({c for c in codes if codes.count(c) > 1})
            raise PanelValueError(f"duplicate variable codes: {dup}")
        row_index = {}
        for i, key in enumerate(self.rows):
            if key in row_index:
                raise DuplicateCellError(f"row {key} appears twice")
            row_index[key] = i
        if not np.all(np.isfinite(values[mask])):
            raise PanelValueError("observed cells must be finite")
        # unobserved cells carry no value
        values[~mask] = 0.0
        object.__setattr__(self, "rows", tuple((str(c), int(y)) for c, y in self.rows))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "_index", {
            "row": row_index,
            "var": {c: j for j, c in enumerate(codes)},
        })

    # -- shape -------------------------------------------------------------
    @property
    def countries(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(c for c, _ in self.rows))

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted({y for _, y in self.rows}))

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(v.code for v in self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def is_rectangular(self) -> bool:
        return self.n_rows == len(self.countries) * len(self.years)

    def var_index(self, code: str) -> int:
        try:
            return self._index["var"][code]
        except KeyError:
            raise UnknownCodeError(f"unknown variable code {code!r}") from None

    def row_index(self, country: str, year: int) -> int:
        try:
            return self._index["row"][(str(country), int(year))]
        except KeyError:
            raise UnknownCodeError(f"unknown row ({country!r}, {year!r})") from None

    def meta(self, code: str) -> VariableMeta:
        return self.variables[self.var_index(code)]

    def codes_with_role(self, role: Role) -> tuple[str, ...]:
        return tuple(v.code for v in self.variables if v.role is role)

    # -- reading -----------------------------------------------------------
    def cell(self, country: str, year: int, code: str) -> float | None:
        i, j = self.row_index(country, year), self.var_index(code)
        return float(self.values[i, j]) if self.mask[i, j] else None

    def column(self, code: str) -> np.ndarray:
        """Column as float array with NaN in unobserved cells (a fresh copy)."""
        j = self.var_index(code)
        out = self.values[:, j].copy()
        out[~self.mask[:, j]] = np.nan
        return out

    def observed_values(self, code: str) -> np.ndarray:
        j = self.var_index(code)
        return self.values[self.mask[:, j], j].copy()

    def n_missing(self, code: str | None = None) -> int:
        if code is None:
            return int((~self.mask).sum())
        return int((~self.mask[:, self.var_index(code)]).sum())

    # -- derived datasets --------------------------------------------------
    def replace(self, values=None, mask=None, variables=None, rows=None) -> "PanelDataset":
        return PanelDataset(
            rows=self.rows if rows is None else rows,
            variables=self.variables if variables is None else tuple(variables),
            values=self.values if values is None else values,
            mask=self.mask if mask is None else mask,
        )

    def select_variables(self, codes: Sequence[str]) -> "PanelDataset":
        idx = [self.var_index(c) for c in codes]
        return PanelDataset(
            rows=self.rows,
            variables=tuple(self.variables[j] for j in idx),
            values=self.values[:, idx],
            mask=self.mask[:, idx],
        )

    def select_rows(self, row_idx: Sequence[int]) -> "PanelDataset":
        idx = np.asarray(row_idx, dtype=int)
        return PanelDataset(
            rows=tuple(self.rows[i] for i in idx),
            variables=self.variables,
            values=self.values[idx],
            mask=self.mask[idx],
        )

    def same_grid(self, other: "PanelDataset") -> bool:
        return self.rows == other.rows and self.codes == other.codes

    def identical(self, other: "PanelDataset") -> bool:
        """Bit-exact equality of grid, metadata, mask and observed values."""
        if not self.same_grid(other) or self.variables != other.variables:
            return False
        if not np.array_equal(self.mask, other.mask):
            return False
        a = self.values[self.mask].view(np.uint64)
        b = other.values[other.mask].view(np.uint64)
        return bool(np.array_equal(a, b))


def build_panel(countries: Sequence[str], years: Sequence[int],
                variables: Sequence[VariableMeta],
                cells: Iterable[tuple[str, int, str, float]] = ()) -> PanelDataset:
    """Materialize a rectangular panel from sparse (country, year, code, value) records.

    Cells not addressed by any record are missing.
    """
    countries = [str(c) for c in countries]
    years = [int(y) for y in years]
    if not countries or not years:
        raise PanelValueError("country and year lists must be non-empty")
    if len(set(countries)) != len(countries):
        raise PanelValueError("duplicate country codes")
    if len(set(years)) != len(years):
        raise PanelValueError("duplicate years")
    rows = [(c, y) for c in countries for y in years]
    row_of = {key: i for i, key in enumerate(rows)}
    col_of = {v.code: j for j, v in enumerate(variables)}
    values = np.zeros((len(rows), len(variables)))
    mask = np.zeros_like(values, dtype=bool)
    for country, year, code, value in cells:
        try:
            i = row_of[(str(country), int(year))]
        except KeyError:
            raise UnknownCodeError(f"unknown country/year ({country!r}, {year!r})") from None
        try:
            j = col_of[code]
        except KeyError:
            raise UnknownCodeError(f"unknown variable code {code!r}") from None
        if mask[i, j]:
            raise DuplicateCellError(f"duplicate cell address ({country}, {year}, {code})")
        value = float(value)
        if not math.isfinite(value):
            raise PanelValueError(f"non-finite value at ({country}, {year}, {code})")
        values[i, j] = value
        mask[i, j] = True
    return PanelDataset(rows=tuple(rows), variables=tuple(variables), values=values, mask=mask)


def from_columns(countries: Sequence[str], years: Sequence[int],
                 columns: Mapping[str, np.ndarray],
                 metas: Mapping[str, VariableMeta] | None = None) -> PanelDataset:
    """Rectangular panel from full-length columns (NaN = missing), country-major rows."""
    rows = tuple((str(c), int(y)) for c in countries for y in years)
    metas = dict(metas or {})
    variables = tuple(metas.get(code, VariableMeta(code)) for code in columns)
    values = np.column_stack([np.asarray(columns[c], dtype=float) for c in columns]) \
        if columns else np.zeros((len(rows), 0))
    if values.shape[0] != len(rows):
        raise PanelValueError(f"columns have {values.shape[0]} rows, grid has {len(rows)}")
    mask = ~np.isnan(values)
    return PanelDataset(rows=rows, variables=variables, values=np.nan_to_num(values), mask=mask)


def missing_profile(ds: PanelDataset) -> MissingProfile:
    observed = ds.mask.sum(axis=0)
    return MissingProfile(tuple(
        VariableProfile(code=v.code, observed=int(o), missing=int(ds.n_rows - o))
        for v, o in zip(ds.variables, observed)
    ))


def observed_values(ds: PanelDataset, code: str) -> np.ndarray:
    return ds.observed_values(code)
