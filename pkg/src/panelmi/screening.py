"""Two-round imputation: a trial run screens variables, a production run imputes the survivors.

A trial run that aborts on a variable marks it as an imputation failure,
drops it and restarts, until a trial completes. The completed trial then
judges every surviving target by the fraction of missing information of its
mean and by how far its completed-data mean and sd drift from the observed
ones. Rejected variables are removed from the panel before production.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

from .datamodel import PanelDataset, Role
from .diagnostics import (DEFAULT_DISCARD, DEFAULT_RHAT_THRESHOLD, ConvergenceStat,
                          CorrelationComparison, DensityPair, DescriptiveComparison,
                          comparison_index, convergence_stat, corr_compare, density_pair,
                          describe_compare)
from .errors import ConfigError, UnimputableVariable
from .mice import ImputationResult, MiceConfig, run_mice
from .pooling import PooledEstimate, per_variable_fmi

DEFAULT_FMI_THRESHOLD = 0.60
DEFAULT_MEAN_DIFF = 0.25
DEFAULT_SD_BOUNDS = (2.0 / 3.0, 1.5)


class Status(str, enum.Enum):
    ACCEPTED = "Accepted"
    IMPUTATION_FAILURE = "RejectedImputationFailure"
    HIGH_FMI = "RejectedHighFmi"
    DESCRIPTIVE_DIVERGENCE = "RejectedDescriptiveDivergence"


@dataclass(frozen=True)
class Verdict:
    code: str
    status: Status
    fmi: float = math.nan
    mean_diff: float = math.nan
    sd_ratio: float = math.nan
    cause: str = ""

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED


@dataclass(frozen=True)
class Thresholds:
    fmi: float = DEFAULT_FMI_THRESHOLD
    mean_diff: float = DEFAULT_MEAN_DIFF
    sd_bounds: tuple[float, float] = DEFAULT_SD_BOUNDS

    def __post_init__(self):
        lo, hi = self.sd_bounds
        if not 0 < lo <= 1 <= hi:
            raise ConfigError(f"sd ratio bounds must satisfy 0 < lo <= 1 <= hi, got {self.sd_bounds}")
        if not 0 < self.fmi <= 1:
            raise ConfigError(f"fmi threshold must lie in (0, 1], got {self.fmi}")


@dataclass(frozen=True)
class ScreeningVerdict:
    verdicts: tuple[Verdict, ...]
    trial: ImputationResult | None      # the completed trial run; None without targets
    attempts: int                       # trial runs started, aborted ones included

    HEADER = ("variable", "status", "fmi", "mean_diff", "sd_ratio", "cause")

    def __getitem__(self, code) -> Verdict:
        for v in self.verdicts:
            if v.code == code:
                return v
        raise KeyError(code)

    @property
    def accepted(self) -> tuple[str, ...]:
        return tuple(v.code for v in self.verdicts if v.accepted)

    @property
    def rejected(self) -> tuple[str, ...]:
        return tuple(v.code for v in self.verdicts if not v.accepted)

    def count(self, status: Status) -> int:
        return sum(v.status is status for v in self.verdicts)

    def table(self):
        for v in self.verdicts:
            yield (v.code, v.status.value, v.fmi, v.mean_diff, v.sd_ratio, v.cause)


def _judge(code, pooled: PooledEstimate, mean_diff, sd_ratio, th: Thresholds) -> Verdict:
    lo, hi = th.sd_bounds
    if pooled.fmi > th.fmi:
        status = Status.HIGH_FMI
    elif mean_diff > th.mean_diff or not lo <= sd_ratio <= hi:
        status = Status.DESCRIPTIVE_DIVERGENCE
    else:
        status = Status.ACCEPTED
    return Verdict(code, status, pooled.fmi, mean_diff, sd_ratio)


def screen_variables(ds: PanelDataset, trial: MiceConfig, *, thresholds: Thresholds = Thresholds(),
                     workers: int = 1) -> ScreeningVerdict:
    """Judge every target of ``ds`` from a trial imputation."""
    if trial.m < 2:
        raise ConfigError(f"the trial run needs m >= 2, got {trial.m}")
    failed: dict[str, str] = {}
    current = ds
    attempts = 0
    result = None
    while current.codes_with_role(Role.TARGET):
        attempts += 1
        try:
            result = run_mice(current, trial, workers=workers)
            break
        except UnimputableVariable as exc:
            failed[exc.code] = f"{type(exc.cause).__name__}: {exc.cause}"
            current = current.select_variables([c for c in current.codes if c != exc.code])
    judged = {}
    if result is not None:
        ref = result.completed[comparison_index(result.m)]
        desc = describe_compare(current, ref, result.targets)
        for code in result.targets:
            if current.n_missing(code) == 0:
                judged[code] = Verdict(code, Status.ACCEPTED, 0.0, 0.0, 1.0)
                continue
            row = desc[code]
            judged[code] = _judge(code, per_variable_fmi(result, code), row.mean_diff,
                                  row.sd_ratio, thresholds)
    verdicts = []
    for code in ds.codes_with_role(Role.TARGET):
        if code in failed:
            verdicts.append(Verdict(code, Status.IMPUTATION_FAILURE, cause=failed[code]))
        else:
            verdicts.append(judged[code])
    return ScreeningVerdict(tuple(verdicts), result, attempts)


# -- full pipeline ------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsOptions:
    comparison: int | None = None       # 0-based completed dataset; None -> ceil(m/2) - 1
    rhat_threshold: float = DEFAULT_RHAT_THRESHOLD
    discard: float = DEFAULT_DISCARD


@dataclass(frozen=True)
class PipelineReport:
    screening: ScreeningVerdict
    production: ImputationResult
    describe: DescriptiveComparison
    correlations: CorrelationComparison
    convergence: tuple[ConvergenceStat, ...]
    densities: tuple[DensityPair, ...]
    fmi: tuple[tuple[str, PooledEstimate], ...]
    trial_config: MiceConfig
    production_config: MiceConfig
    comparison: int
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def accepted(self) -> tuple[str, ...]:
        return self.screening.accepted

    def ovl(self, code: str) -> tuple[float, float]:
        for d in self.densities:
            if d.code == code:
                return d.ovl_completed, d.ovl_imputed
        raise KeyError(code)


def _convergence(result: ImputationResult, code: str, opts: DiagnosticsOptions) -> ConvergenceStat:
    if code not in result.traces.variables:
        # nothing imputed, the chains are identical by construction
        return ConvergenceStat(code, 1.0, 1.0, opts.rhat_threshold)
    return convergence_stat(result.traces, code, opts.discard, opts.rhat_threshold)


def pipeline_run(ds: PanelDataset, trial: MiceConfig, production: MiceConfig, *,
                 thresholds: Thresholds = Thresholds(), diagnostics: DiagnosticsOptions = DiagnosticsOptions(),
                 workers: int = 1) -> PipelineReport:
    if production.m < 2:
        raise ConfigError(f"the production run needs m >= 2, got {production.m}")
    kept_iters = production.iterations - math.floor(diagnostics.discard * production.iterations)
    if kept_iters < 4:
        raise ConfigError(f"convergence needs >= 4 retained iterations; {production.iterations} "
                          f"iterations with discard {diagnostics.discard} keep {kept_iters}")
    timings = {}
    t0 = time.perf_counter()
    verdict = screen_variables(ds, trial, thresholds=thresholds, workers=workers)
    timings["screening"] = time.perf_counter() - t0

    rejected = set(verdict.rejected)
    kept = ds.select_variables([c for c in ds.codes if c not in rejected])
    t0 = time.perf_counter()
    result = run_mice(kept, production, workers=workers)
    timings["production"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    accepted = verdict.accepted
    comp = diagnostics.comparison if diagnostics.comparison is not None else comparison_index(result.m)
    if not 0 <= comp < result.m:
        raise ConfigError(f"comparison imputation {comp + 1} is outside 1..{result.m}")
    ref = result.completed[comp]
    desc = describe_compare(kept, ref, accepted)
    corr = corr_compare(kept, ref, accepted)
    conv = tuple(_convergence(result, c, diagnostics) for c in accepted)
    dens = tuple(density_pair(kept, ref, c) for c in accepted)
    fmi = tuple((c, per_variable_fmi(result, c)) for c in accepted)
    timings["diagnostics"] = time.perf_counter() - t0
    return PipelineReport(verdict, result, desc, corr, conv, dens, fmi, trial, production,
                          comp, timings)


def restrict_to(ds: PanelDataset, codes: Sequence[str]) -> PanelDataset:
    """``ds`` with only the given targets kept; auxiliaries and identifiers stay."""
    keep = set(codes)
    return ds.select_variables([c for c in ds.codes
                                if c in keep or ds.meta(c).role is not Role.TARGET])
