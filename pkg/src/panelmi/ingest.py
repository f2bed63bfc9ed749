"""Panel CSV readers/writers and the schema file.

Schema grammar (INI, parsed with :mod:`configparser`)::

    [panel]
    country_column = country        ; optional, default "country"
    year_column = year              ; optional, default "year"
    missing_tokens = NA .           ; whitespace separated; "" is always missing
    countries = PAK IND             ; optional grid extents, used when a long
    years = 2005-2019               ;   file carries no data rows

    [var:tscitjar]
    label = Scientific and technical journal articles
    capacity = Technology           ; Technology Financial Human Infrastructure
                                    ; PublicPolicy Social Auxiliary Identifier
    direction = +1                  ; +1 higher is better, -1 lower is better
    role = target                   ; target | auxiliary | identifier

Variables are declared in file order; that order is the "schema order".
"""
from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datamodel import Capacity, PanelDataset, Role, VariableMeta
from .errors import IngestError, PanelValueError, UnknownCodeError

DEFAULT_MISSING_TOKENS = ("", "NA", ".")
LONG_HEADER = ("country", "year", "variable", "value")


@dataclass(frozen=True)
class Schema:
    variables: tuple[VariableMeta, ...]
    country_column: str = "country"
    year_column: str = "year"
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS
    countries: tuple[str, ...] = ()
    years: tuple[int, ...] = ()
    _by_code: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_code = {}
        for v in self.variables:
            if v.code in by_code:
                raise PanelValueError(f"schema declares {v.code!r} twice")
            by_code[v.code] = v
        object.__setattr__(self, "_by_code", by_code)
        if "" not in self.missing_tokens:
            object.__setattr__(self, "missing_tokens", ("",) + tuple(self.missing_tokens))

    def __contains__(self, code):
        return code in self._by_code

    def __getitem__(self, code) -> VariableMeta:
        try:
            return self._by_code[code]
        except KeyError:
            raise UnknownCodeError(f"variable {code!r} is not declared in the schema") from None

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(v.code for v in self.variables)

    @classmethod
    def from_dataset(cls, ds: PanelDataset, **kw) -> "Schema":
        return cls(variables=ds.variables, countries=ds.countries, years=ds.years, **kw)


def _parse_years(text: str) -> tuple[int, ...]:
    out = []
    for tok in text.replace(",", " ").split():
        lo, sep, hi = tok.partition("-")
        if sep and lo:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return tuple(out)


def read_schema(path) -> Schema:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise IngestError(f"malformed schema file {path}: {exc}") from None
    panel = parser["panel"] if parser.has_section("panel") else {}
    variables = []
    for section in parser.sections():
        if not section.startswith("var:"):
            if section != "panel":
                raise IngestError(f"unknown schema section [{section}]")
            continue
        code = section[4:].strip()
        entry = parser[section]
        try:
            direction = int(entry.get("direction", "+1").strip())
            variables.append(VariableMeta(
                code=code,
                label=entry.get("label", ""),
                capacity=Capacity.parse(entry.get("capacity", "Auxiliary")),
                direction=direction,
                role=Role.parse(entry.get("role", "target")),
            ))
        except ValueError as exc:
            raise IngestError(f"schema entry [{section}]: {exc}") from None
    tokens = tuple(panel.get("missing_tokens", " ".join(DEFAULT_MISSING_TOKENS[1:])).split())
    try:
        years = _parse_years(panel.get("years", ""))
    except ValueError:
        raise IngestError(f"schema years {panel.get('years')!r} are not integers") from None
    return Schema(
        variables=tuple(variables),
        country_column=panel.get("country_column", "country"),
        year_column=panel.get("year_column", "year"),
        missing_tokens=("",) + tokens,
        countries=tuple(panel.get("countries", "").split()),
        years=years,
    )


def write_schema(schema: Schema, path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    panel = {
        "country_column": schema.country_column,
        "year_column": schema.year_column,
        "missing_tokens": " ".join(t for t in schema.missing_tokens if t),
    }
    if schema.countries:
        panel["countries"] = " ".join(schema.countries)
    if schema.years:
        panel["years"] = " ".join(str(y) for y in schema.years)
    parser["panel"] = panel
    for v in schema.variables:
        parser[f"var:{v.code}"] = {
            "label": v.label,
            "capacity": v.capacity.value,
            "direction": f"{v.direction:+d}",
            "role": v.role.value,
        }
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


# -- value formatting --------------------------------------------------------

def format_value(x: float, decimals="full") -> str:
    if decimals == "full":
        # repr is the shortest string that round-trips the double
        return repr(float(x))
    return f"{float(x):.{int(decimals)}f}"


def _parse_cell(token: str, schema: Schema, row: int, column: str):
    tok = token.strip()
    if tok in schema.missing_tokens:
        return None
    try:
        value = float(tok)
    except ValueError:
        raise IngestError(f"unparseable numeric cell {token!r}", row=row, column=column) from None
    if not math.isfinite(value):
        raise IngestError(f"non-finite numeric cell {token!r}", row=row, column=column)
    return value


def _parse_year(token: str, row: int, column: str) -> int:
    try:
        y = float(token.strip())
    except ValueError:
        raise IngestError(f"unparseable year {token!r}", row=row, column=column) from None
    if y != int(y):
        raise IngestError(f"non-integer year {token!r}", row=row, column=column)
    return int(y)


def _grid(countries: list, years: set, schema: Schema):
    countries = list(dict.fromkeys(list(countries) or list(schema.countries)))
    years = sorted(set(years) or set(schema.years))
    if not countries or not years:
        raise IngestError("file has no data rows and the schema declares no grid extents")
    return countries, years


def _assemble(countries, years, variables, records) -> PanelDataset:
    rows = tuple((c, y) for c in countries for y in years)
    row_of = {k: i for i, k in enumerate(rows)}
    values = np.zeros((len(rows), len(variables)))
    mask = np.zeros(values.shape, dtype=bool)
    for (country, year), j, value in records:
        i = row_of[(country, year)]
        values[i, j] = value
        mask[i, j] = True
    return PanelDataset(rows=rows, variables=tuple(variables), values=values, mask=mask)


def read_wide_csv(path, schema: Schema) -> PanelDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for col in (schema.country_column, schema.year_column):
            if col not in header:
                raise IngestError(f"header lacks the {col!r} column", row=1, column=col)
        ci, yi = header.index(schema.country_column), header.index(schema.year_column)
        data_cols = [(k, h) for k, h in enumerate(header) if k not in (ci, yi)]
        if not data_cols:
            raise IngestError("header declares no variable columns", row=1)
        for _, h in data_cols:
            if h not in schema:
                raise IngestError(f"header column {h!r} is not declared in the schema", row=1, column=h)
        variables = [schema[h] for _, h in data_cols]
        seen, countries, years, records = set(), [], set(), []
        for lineno, line in enumerate(reader, start=2):
            if not line or all(not t.strip() for t in line):
                continue
            if len(line) != len(header):
                raise IngestError(f"expected {len(header)} fields, found {len(line)}", row=lineno)
            country = line[ci].strip()
            year = _parse_year(line[yi], lineno, schema.year_column)
            if (country, year) in seen:
                raise IngestError(f"duplicate (country, year) row ({country}, {year})", row=lineno)
            seen.add((country, year))
            countries.append(country)
            years.add(year)
            for j, (k, h) in enumerate(data_cols):
                value = _parse_cell(line[k], schema, lineno, h)
                if value is not None:
                    records.append(((country, year), j, value))
    countries, years = _grid(countries, years, schema)
    return _assemble(countries, years, variables, records)


def read_long_csv(path, schema: Schema) -> PanelDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        expected = [schema.country_column, schema.year_column, "variable", "value"]
        if header != expected:
            raise IngestError(f"long header must be {','.join(expected)}, got {','.join(header)}", row=1)
        j_of = {v.code: j for j, v in enumerate(schema.variables)}
        seen, countries, years, records = set(), [], set(), []
        for lineno, line in enumerate(reader, start=2):
            if not line or all(not t.strip() for t in line):
                continue
            if len(line) != 4:
                raise IngestError(f"expected 4 fields, found {len(line)}", row=lineno)
            country, code = line[0].strip(), line[2].strip()
            year = _parse_year(line[1], lineno, schema.year_column)
            if code not in j_of:
                raise IngestError(f"unknown variable code {code!r}", row=lineno, column="variable")
            if (country, year, code) in seen:
                raise IngestError(f"duplicate cell ({country}, {year}, {code})", row=lineno)
            seen.add((country, year, code))
            countries.append(country)
            years.add(year)
            value = _parse_cell(line[3], schema, lineno, "value")
            if value is not None:
                records.append(((country, year), j_of[code], value))
    countries, years = _grid(countries, years, schema)
    return _assemble(countries, years, schema.variables, records)


def read_panel(path, schema: Schema) -> PanelDataset:
    """Dispatch on the header: long layout if it is exactly country,year,variable,value."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    header = [h.strip() for h in header]
    if header == [schema.country_column, schema.year_column, "variable", "value"]:
        return read_long_csv(path, schema)
    return read_wide_csv(path, schema)


def _ensure_parent(path):
    parent = Path(path).parent
    if parent and not parent.exists():
        raise OSError(f"directory {parent} does not exist")


def write_wide_csv(ds: PanelDataset, path, decimals="full", country_column="country",
                   year_column="year") -> None:
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([country_column, year_column, *ds.codes])
        for i, (country, year) in enumerate(ds.rows):
            w.writerow([country, year, *(
                format_value(ds.values[i, j], decimals) if ds.mask[i, j] else ""
                for j in range(len(ds.variables)))])


def write_long_csv(ds: PanelDataset, path, decimals="full", country_column="country",
                   year_column="year") -> None:
    """One line per cell, missing cells included with an empty value."""
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([country_column, year_column, "variable", "value"])
        for i, (country, year) in enumerate(ds.rows):
            for j, code in enumerate(ds.codes):
                w.writerow([country, year, code,
                            format_value(ds.values[i, j], decimals) if ds.mask[i, j] else ""])


def write_rows(path, header: Sequence[str], rows) -> None:
    """Plain CSV emission used by every report writer."""
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return ""
        return repr(x)
    return x


def read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def count_value_tokens(path, schema: Schema) -> int:
    """Number of parseable, non-missing data tokens in a wide file (ingestion audit)."""
    n = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        skip = {header.index(schema.country_column), header.index(schema.year_column)}
        for line in reader:
            for k, tok in enumerate(line):
                if k not in skip and tok.strip() not in schema.missing_tokens:
                    n += 1
    return n


__all__ = [
    "Schema", "read_schema", "write_schema", "read_wide_csv", "read_long_csv",
    "read_panel", "write_wide_csv", "write_long_csv", "write_rows", "read_rows",
    "format_value", "DEFAULT_MISSING_TOKENS",
]
