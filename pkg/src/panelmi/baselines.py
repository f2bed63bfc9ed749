"""Amputation under MCAR/MAR/MNAR, single-imputation comparators, and evaluation.

MAR and MNAR amputation delete a cell with probability
``1 / (1 + exp(-(alpha + 2 z)))`` where ``z`` is the standardized driver (MAR)
or the standardized cell value itself (MNAR); ``alpha`` is solved for
so the mean deletion probability equals the requested rate.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit
from scipy.stats import ks_2samp

from .datamodel import PanelDataset, Role
from .diagnostics import pairwise_complete_corr, pearson
from .errors import PanelValueError, ShapeMismatchError
from .linmodel import fit_ols

LOGISTIC_SLOPE = 2.0


class Mechanism(str, enum.Enum):
    MCAR = "MCAR"
    MAR = "MAR"
    MNAR = "MNAR"

    @classmethod
    def parse(cls, text):
        try:
            return cls(str(text).upper())
        except ValueError:
            raise PanelValueError(f"unknown missingness mechanism {text!r}") from None


@dataclass(frozen=True)
class AmputationPlan:
    mechanism: Mechanism
    rate: float
    targets: tuple[str, ...]
    seed: int
    driver: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not 0.0 < self.rate < 1.0:
            raise PanelValueError(f"amputation rate must lie in (0, 1), got {self.rate}")
        if self.mechanism is Mechanism.MAR:
            if self.driver is None:
                raise PanelValueError("MAR amputation needs a driver variable")
            if self.driver in self.targets:
                raise PanelValueError("the MAR driver cannot be one of the targets")


@dataclass(frozen=True)
class DeletedTruth:
    """Cells removed by amputation: parallel arrays of row, column and true value."""
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    codes: tuple[str, ...]

    def for_code(self, code: str) -> tuple[np.ndarray, np.ndarray]:
        j = self.codes.index(code)
        sel = self.cols == j
        return self.rows[sel], self.values[sel]

    @classmethod
    def between(cls, truth: PanelDataset, amputed: PanelDataset) -> "DeletedTruth":
        """Reconstruct the record from a truth panel and its amputed copy."""
        if not truth.same_grid(amputed):
            raise ShapeMismatchError("truth and amputed datasets differ in rows or variables")
        removed = truth.mask & ~amputed.mask
        r, c = np.nonzero(removed)
        return cls(r, c, truth.values[r, c], truth.codes)


def _standardize(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)


def logistic_intercept(z: np.ndarray, rate: float, slope: float = LOGISTIC_SLOPE) -> float:
    """alpha with mean(expit(alpha + slope z)) == rate."""
    f = lambda a: float(np.mean(expit(a + slope * z))) - rate
    if f(-60.0) > 0 or f(60.0) < 0:
        raise PanelValueError(f"rate {rate} is infeasible for this driver")
    return float(brentq(f, -60.0, 60.0, xtol=1e-12))


def ampute(truth: PanelDataset, plan: AmputationPlan):
    """Delete target cells of a complete panel; returns (amputed, DeletedTruth)."""
    rng = np.random.default_rng(plan.seed)
    mask = truth.mask.copy()
    cols = [truth.var_index(c) for c in plan.targets]
    if plan.driver is not None:
        dj = truth.var_index(plan.driver)
        if not truth.mask[:, dj].all():
            raise PanelValueError(f"driver {plan.driver!r} has missing values")
    for code, j in zip(plan.targets, cols):
        if not truth.mask[:, j].all():
            raise PanelValueError(f"target {code!r} is not complete in the truth panel")
        u = rng.random(truth.n_rows)
        if plan.mechanism is Mechanism.MCAR:
            p = np.full(truth.n_rows, plan.rate)
        else:
            src = truth.values[:, dj] if plan.mechanism is Mechanism.MAR else truth.values[:, j]
            z = _standardize(src)
            p = expit(logistic_intercept(z, plan.rate) + LOGISTIC_SLOPE * z)
        mask[:, j] &= ~(u < p)
    amputed = truth.replace(mask=mask)
    return amputed, DeletedTruth.between(truth, amputed)


# -- comparators ------------------------------------------------------------------

def _targets(ds: PanelDataset):
    return ds.codes_with_role(Role.TARGET)


def listwise_delete(ds: PanelDataset, targets: Sequence[str] | None = None) -> PanelDataset:
    cols = [ds.var_index(c) for c in (_targets(ds) if targets is None else targets)]
    keep = np.flatnonzero(ds.mask[:, cols].all(axis=1))
    return ds.select_rows(keep)


def mean_substitute(ds: PanelDataset, targets: Sequence[str] | None = None) -> PanelDataset:
    values, mask = ds.values.copy(), ds.mask.copy()
    for code in (_targets(ds) if targets is None else targets):
        j = ds.var_index(code)
        obs = ds.mask[:, j]
        if not obs.any():
            raise PanelValueError(f"{code!r} has no observed values")
        values[~obs, j] = ds.values[obs, j].mean()
        mask[:, j] = True
    return ds.replace(values=values, mask=mask)


def regression_impute(ds: PanelDataset,
                      predictors: Mapping[str, Sequence[str]] | None = None) -> PanelDataset:
    """Conditional-mean imputation from OLS fitted values, without noise.

    Predictor columns are taken from the mean-substituted panel so every
    design is complete; ``predictors`` defaults to all other targets plus
    auxiliaries.
    """
    targets = _targets(ds)
    filled = mean_substitute(ds)
    values, mask = ds.values.copy(), ds.mask.copy()
    aux = ds.codes_with_role(Role.AUXILIARY)
    for code in targets:
        j = ds.var_index(code)
        obs = ds.mask[:, j]
        if obs.all():
            continue
        preds = list(predictors[code]) if predictors and code in predictors else \
            [c for c in (*targets, *aux) if c != code]
        X = np.column_stack([np.ones(ds.n_rows)] + [filled.values[:, ds.var_index(c)] for c in preds])
        fit = fit_ols(X[obs], ds.values[obs, j])
        values[~obs, j] = X[~obs] @ fit.beta_hat
        mask[:, j] = True
    return ds.replace(values=values, mask=mask)


def pairwise_corr(ds: PanelDataset, variables: Sequence[str] | None = None):
    codes = ds.codes if variables is None else variables
    idx = [ds.var_index(c) for c in codes]
    return pairwise_complete_corr(ds.values[:, idx], ds.mask[:, idx])


# -- evaluation ------------------------------------------------------------------------

@dataclass(frozen=True)
class VariableMetrics:
    code: str
    bias: float
    ks: float
    corr_distortion: float


@dataclass(frozen=True)
class EvaluationMetrics:
    variables: tuple[VariableMetrics, ...]

    def __getitem__(self, code) -> VariableMetrics:
        for v in self.variables:
            if v.code == code:
                return v
        raise KeyError(code)


def ks_distance(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.size == 0 or b.size == 0:
        return 0.0
    return float(ks_2samp(a, b).statistic)


def _evaluate_one(truth: PanelDataset, deleted: DeletedTruth, completed: PanelDataset, codes):
    if not truth.same_grid(completed):
        raise ShapeMismatchError("completed dataset does not match the truth grid")
    out = []
    # distortion is measured against every other variable, not only the scored ones
    all_idx = range(len(truth.codes))
    for code in codes:
        j = truth.var_index(code)
        rows, true_vals = deleted.for_code(code)
        comp_col = completed.values[:, j]
        bias = float(comp_col.mean() - truth.values[:, j].mean())
        ks = ks_distance(comp_col[rows], true_vals)
        dist = 0.0
        for k in all_idx:
            if k == j:
                continue
            rt = pearson(truth.values[:, j], truth.values[:, k])
            rc = pearson(comp_col, completed.values[:, k])
            if not (math.isnan(rt) or math.isnan(rc)):
                dist = max(dist, abs(rc - rt))
        out.append((bias, ks, dist))
    return np.array(out)


def evaluate(truth: PanelDataset, deleted: DeletedTruth, completed,
             targets: Sequence[str] | None = None) -> EvaluationMetrics:
    """Bias, KS(imputed vs deleted truth) and correlation distortion per target.

    ``completed`` is one dataset or a sequence; metrics are averaged over a sequence.
    """
    sets = [completed] if isinstance(completed, PanelDataset) else list(completed)
    if not sets:
        raise PanelValueError("no completed datasets to evaluate")
    codes = tuple(targets) if targets is not None else tuple(
        c for c in deleted.codes if (deleted.cols == deleted.codes.index(c)).any())
    if any(not np.all(ds.mask[:, [truth.var_index(c) for c in codes]]) for ds in sets):
        raise PanelValueError("completed datasets still contain missing target cells")
    metrics = np.mean([_evaluate_one(truth, deleted, ds, codes) for ds in sets], axis=0)
    return EvaluationMetrics(tuple(VariableMetrics(c, *map(float, metrics[i]))
                                   for i, c in enumerate(codes)))
