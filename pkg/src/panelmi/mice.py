"""Chained-equations driver running m independent PMM chains.

Chain ``c`` draws from ``numpy.random.Generator(PCG64(mix_seed(seed, c)))`` and
nothing else, so results do not depend on how chains are scheduled.
Within a chain: every missing target cell is first filled with a uniform
draw (``Generator.integers``) from its variable's observed values, variables
in schema order; then ``iterations`` sweeps call the PMM step for each
incomplete target in visit order. The last sweep's values form the chain's
completed dataset.
"""
from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .datamodel import PanelDataset, Role
from .errors import (CollinearityError, ConfigError, IncompleteAuxiliary, InsufficientData,
                     PanelValueError, UnimputableVariable)
from .ingest import Schema, read_rows, read_wide_csv, write_rows, write_wide_csv
from .pmm import PmmSettings, pmm_step

MASK64 = (1 << 64) - 1


def mix_seed(seed: int, chain: int) -> int:
    """SplitMix64 finalizer applied to seed + golden-ratio increment * (chain + 1)."""
    z = (int(seed) + 0x9E3779B97F4A7C15 * (int(chain) + 1)) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(mix_seed(seed, chain)))


class VisitOrder(str, enum.Enum):
    ASCENDING_MISSINGNESS = "AscendingMissingness"
    SCHEMA_ORDER = "SchemaOrder"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        for m in cls:
            if text in (m.value, m.name, m.value.lower()):
                return m
        raise PanelValueError(f"unknown visit order {text!r}")


@dataclass(frozen=True)
class MiceConfig:
    seed: int
    m: int = 5
    iterations: int = 10
    pmm: PmmSettings = PmmSettings()
    visit_order: VisitOrder = VisitOrder.ASCENDING_MISSINGNESS
    ridge_rescue: bool = False
    # predictor policy
    country_indicators: bool = True
    year_numeric: bool = True
    predictors: Mapping[str, tuple[str, ...]] | None = None
    drop_incomplete_auxiliaries: bool = False
    init: str = "RandomObservedDraw"

    def __post_init__(self):
        if int(self.m) < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if int(self.iterations) < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.init != "RandomObservedDraw":
            raise ConfigError(f"unsupported initialization {self.init!r}")
        object.__setattr__(self, "visit_order", VisitOrder.parse(self.visit_order))
        if self.predictors is not None:
            object.__setattr__(self, "predictors",
                               {k: tuple(v) for k, v in self.predictors.items()})

    def replace(self, **kw) -> "MiceConfig":
        from dataclasses import replace
        return replace(self, **kw)


@dataclass(frozen=True)
class ChainTrace:
    """Per (chain, iteration, variable) mean and sd of the imputed cells."""
    variables: tuple[str, ...]
    means: np.ndarray   # (m, T, len(variables))
    sds: np.ndarray

    def series(self, code: str):
        j = self.variables.index(code)
        return self.means[:, :, j], self.sds[:, :, j]

    @property
    def shape(self):
        return self.means.shape


@dataclass(frozen=True, eq=False)
class ImputationResult:
    original: PanelDataset
    completed: tuple[PanelDataset, ...]
    imputed: np.ndarray            # provenance: True = Imputed, shape of original grid
    traces: ChainTrace
    targets: tuple[str, ...]       # targets the run covered (incl. complete ones)
    config: MiceConfig | None = None

    @property
    def m(self) -> int:
        return len(self.completed)

    def provenance(self, country, year, code) -> str:
        i, j = self.original.row_index(country, year), self.original.var_index(code)
        return "Imputed" if self.imputed[i, j] else "Observed"


# -- policies ---------------------------------------------------------------

def imputation_targets(ds: PanelDataset) -> tuple[str, ...]:
    return ds.codes_with_role(Role.TARGET)


def visit_order(ds: PanelDataset, policy=VisitOrder.ASCENDING_MISSINGNESS,
                targets: Sequence[str] | None = None) -> list[str]:
    targets = list(imputation_targets(ds) if targets is None else targets)
    if VisitOrder.parse(policy) is VisitOrder.SCHEMA_ORDER:
        return targets
    # sorted() is stable, so equal fractions keep schema order
    return sorted(targets, key=lambda c: ds.n_missing(c))


def initialize_fill(ds: PanelDataset, rng: np.random.Generator,
                    targets: Sequence[str] | None = None) -> PanelDataset:
    """Fill each missing target cell with a uniform draw from the variable's observed values."""
    targets = imputation_targets(ds) if targets is None else targets
    values = ds.values.copy()
    mask = ds.mask.copy()
    for code in targets:
        j = ds.var_index(code)
        obs = ds.mask[:, j]
        miss = np.flatnonzero(~obs)
        if miss.size == 0:
            continue
        pool = ds.values[obs, j]
        if pool.size == 0:
            raise UnimputableVariable(code, InsufficientData("all cells are missing", target=code))
        values[miss, j] = pool[rng.integers(0, pool.size, size=miss.size)]
        mask[miss, j] = True
    return ds.replace(values=values, mask=mask)


@dataclass
class _Plan:
    """Picklable per-run precomputation shared by all chains."""
    seed: int
    iterations: int
    settings: PmmSettings
    ridge_rescue: bool
    targets: list            # all targets, schema order
    target_cols: list        # dataset column index of each target
    imputed: list            # indices into targets with missing cells, schema order
    order: list              # visit order over `imputed`
    base: np.ndarray         # (n, b) fixed predictor block
    base_cols: dict          # target idx -> base column indices used
    other_cols: dict         # target idx -> other target indices used
    values: np.ndarray       # original values
    mask: np.ndarray         # original mask
    codes: list = field(default_factory=list)


def _base_block(ds: PanelDataset, config: MiceConfig, auxiliaries):
    names, cols = [], []
    if config.year_numeric:
        names.append("year")
        cols.append(np.array([y for _, y in ds.rows], dtype=float))
    if config.country_indicators:
        country_of_row = [c for c, _ in ds.rows]
        # every country gets a column; each target drops its own reference
        for country in ds.countries:
            names.append(f"country={country}")
            cols.append(np.array([c == country for c in country_of_row], dtype=float))
    for code in auxiliaries:
        names.append(code)
        cols.append(ds.values[:, ds.var_index(code)].copy())
    base = np.column_stack(cols) if cols else np.zeros((ds.n_rows, 0))
    return names, base


def _make_plan(ds: PanelDataset, config: MiceConfig) -> _Plan:
    targets = list(imputation_targets(ds))
    aux = []
    for code in ds.codes_with_role(Role.AUXILIARY):
        n_miss = ds.n_missing(code)
        if n_miss:
            if config.drop_incomplete_auxiliaries:
                continue
            raise IncompleteAuxiliary(code, n_miss)
        aux.append(code)
    for code in targets:
        if ds.n_missing(code) == ds.n_rows:
            raise UnimputableVariable(code, InsufficientData("all cells are missing", target=code))
    base_names, base = _base_block(ds, config, aux)
    tcols = [ds.var_index(c) for c in targets]
    imputed = [t for t, c in enumerate(targets) if ds.n_missing(c)]
    order_codes = visit_order(ds, config.visit_order, [targets[t] for t in imputed])
    order = [targets.index(c) for c in order_codes]
    base_cols, other_cols = {}, {}
    for t in imputed:
        code = targets[t]
        observed = ds.mask[:, tcols[t]]
        if config.predictors is not None and code in config.predictors:
            wanted = set(config.predictors[code])
            unknown = wanted - set(base_names) - set(targets) - {"country"}
            if unknown:
                raise ConfigError(f"{code}: unknown predictors {sorted(unknown)}")
            keep_country = "country" in wanted
        else:
            wanted = None
            keep_country = True
        sel = []
        reference_dropped = False
        for b, name in enumerate(base_names):
            if name.startswith("country="):
                if not keep_country:
                    continue
                # indicator for a country with no observed rows carries no information;
                # the first country that does have observed rows is the reference level
                if not base[observed, b].any():
                    continue
                if not reference_dropped:
                    reference_dropped = True
                    continue
            elif wanted is not None and name not in wanted:
                continue
            sel.append(b)
        base_cols[t] = np.array(sel, dtype=np.intp)
        other_cols[t] = np.array([u for u, c in enumerate(targets)
                                  if u != t and (wanted is None or c in wanted)], dtype=np.intp)
    return _Plan(
        seed=int(config.seed), iterations=int(config.iterations), settings=config.pmm,
        ridge_rescue=config.ridge_rescue, targets=targets, target_cols=tcols,
        imputed=imputed, order=order, base=base, base_cols=base_cols,
        other_cols=other_cols, values=np.array(ds.values), mask=np.array(ds.mask),
        codes=list(ds.codes),
    )


def _run_chain(plan: _Plan, chain: int):
    rng = chain_rng(plan.seed, chain)
    work = plan.values[:, plan.target_cols].copy()
    obs = plan.mask[:, plan.target_cols]
    for t in range(len(plan.targets)):
        miss = np.flatnonzero(~obs[:, t])
        if miss.size:
            pool = work[obs[:, t], t]
            work[miss, t] = pool[rng.integers(0, pool.size, size=miss.size)]
    pos = {t: k for k, t in enumerate(plan.imputed)}
    means = np.zeros((plan.iterations, len(plan.imputed)))
    sds = np.zeros_like(means)
    for it in range(plan.iterations):
        for t in plan.order:
            preds = np.hstack([plan.base[:, plan.base_cols[t]], work[:, plan.other_cols[t]]])
            try:
                step = pmm_step(work[:, t], obs[:, t], preds, plan.settings, rng,
                                ridge_rescue=plan.ridge_rescue, target=plan.targets[t])
            except (CollinearityError, InsufficientData) as exc:
                raise UnimputableVariable(plan.targets[t], exc, chain=chain) from None
            work[step.rows, t] = step.values
            means[it, pos[t]] = step.imputed_mean
            sds[it, pos[t]] = step.imputed_sd
    return work, means, sds


def _chain_job(args):
    plan, chain = args
    try:
        return chain, _run_chain(plan, chain), None
    except UnimputableVariable as exc:
        return chain, None, exc


def run_mice(ds: PanelDataset, config: MiceConfig, workers: int = 1) -> ImputationResult:
    """Run ``config.m`` chains; ``workers`` > 1 spreads chains over processes."""
    plan = _make_plan(ds, config)
    jobs = [(plan, c) for c in range(config.m)]
    outcomes = [None] * config.m
    if workers > 1 and config.m > 1 and plan.imputed:
        with ProcessPoolExecutor(max_workers=min(workers, config.m)) as pool:
            for chain, out, err in pool.map(_chain_job, jobs):
                outcomes[chain] = (out, err)
    else:
        for job in jobs:
            chain, out, err = _chain_job(job)
            outcomes[chain] = (out, err)
            if err is not None:
                break
    # report the failure of the lowest chain index, independent of scheduling
    for out in outcomes:
        if out is not None and out[1] is not None:
            raise out[1]
    completed = []
    means = np.zeros((config.m, config.iterations, len(plan.imputed)))
    sds = np.zeros_like(means)
    full_targets_mask = ds.mask.copy()
    full_targets_mask[:, plan.target_cols] = True
    for c, (out, _) in enumerate(outcomes):
        work, means[c], sds[c] = out
        values = ds.values.copy()
        values[:, plan.target_cols] = work
        completed.append(ds.replace(values=values, mask=full_targets_mask))
    imputed = np.zeros(ds.mask.shape, dtype=bool)
    imputed[:, plan.target_cols] = ~ds.mask[:, plan.target_cols]
    traces = ChainTrace(tuple(plan.targets[t] for t in plan.imputed), means, sds)
    return ImputationResult(original=ds, completed=tuple(completed), imputed=imputed,
                            traces=traces, targets=tuple(plan.targets), config=config)


# -- serialization ------------------------------------------------------------

def imputation_filename(index: int, m: int) -> str:
    """1-based file name, zero-padded to at least three digits."""
    width = max(3, len(str(m)))
    return f"imp_{index:0{width}d}.csv"


def write_result(result: ImputationResult, outdir, decimals="full") -> list[str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = []
    for c, ds in enumerate(result.completed, start=1):
        name = imputation_filename(c, result.m)
        write_wide_csv(ds, outdir / name, decimals=decimals)
        names.append(name)
    orig = result.original
    tcols = [orig.var_index(c) for c in result.targets]
    write_rows(outdir / "provenance.csv", ["country", "year", "variable", "flag"], (
        (country, year, orig.codes[j], "Imputed" if result.imputed[i, j] else "Observed")
        for i, (country, year) in enumerate(orig.rows) for j in tcols))
    tr = result.traces
    write_rows(outdir / "trace.csv", ["chain", "iteration", "variable", "mean", "sd"], (
        (c + 1, it + 1, code, tr.means[c, it, v], tr.sds[c, it, v])
        for c in range(tr.means.shape[0]) for it in range(tr.means.shape[1])
        for v, code in enumerate(tr.variables)))
    names += ["provenance.csv", "trace.csv"]
    return names


def read_trace(path) -> ChainTrace:
    rows = read_rows(path)
    variables = list(dict.fromkeys(r["variable"] for r in rows))
    m = max((int(r["chain"]) for r in rows), default=0)
    T = max((int(r["iteration"]) for r in rows), default=0)
    means = np.full((m, T, len(variables)), np.nan)
    sds = np.full_like(means, np.nan)
    vi = {v: k for k, v in enumerate(variables)}
    for r in rows:
        c, it, v = int(r["chain"]) - 1, int(r["iteration"]) - 1, vi[r["variable"]]
        means[c, it, v] = float(r["mean"])
        sds[c, it, v] = float(r["sd"])
    return ChainTrace(tuple(variables), means, sds)


def read_result(observed: PanelDataset, imputed_paths: Sequence, schema: Schema,
                trace_path=None) -> ImputationResult:
    """Rebuild an ImputationResult from files written by :func:`write_result`."""
    completed = []
    for p in imputed_paths:
        ds = read_wide_csv(p, schema).select_variables(observed.codes)
        if ds.rows != observed.rows:
            raise PanelValueError(f"{p}: row grid differs from the observed dataset")
        completed.append(ds)
    targets = imputation_targets(observed)
    imputed = np.zeros(observed.mask.shape, dtype=bool)
    for code in targets:
        j = observed.var_index(code)
        imputed[:, j] = ~observed.mask[:, j]
    if trace_path is not None and Path(trace_path).exists():
        traces = read_trace(trace_path)
    else:
        traces = ChainTrace((), np.zeros((len(completed), 0, 0)), np.zeros((len(completed), 0, 0)))
    return ImputationResult(original=observed, completed=tuple(completed), imputed=imputed,
                            traces=traces, targets=targets)


__all__ = [
    "MiceConfig", "VisitOrder", "ChainTrace", "ImputationResult", "run_mice",
    "initialize_fill", "visit_order", "mix_seed", "chain_rng", "write_result",
    "read_result", "read_trace", "imputation_filename", "imputation_targets",
]
