"""Predictive mean matching for one variable.

Donor pools are formed on the absolute difference of predicted values. Every
observed row whose distance equals the k-th smallest distance joins the pool,
so the pool can exceed k on exact ties; the donor is then drawn uniformly from
the pool with one ``Generator.random`` draw per recipient, recipients taken in
row order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import PanelDataset
from .errors import CollinearityError, InsufficientData, PanelValueError
from .linmodel import draw_posterior, fit_ols


class MatchType(str, enum.Enum):
    # donors and recipients both predicted with the drawn coefficients
    BOTH_STAR = "BothStar"
    # donors with the least-squares coefficients, recipients with the draw
    OBSERVED_HAT_MISSING_STAR = "ObservedHatMissingStar"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        for m in cls:
            if text in (m.value, m.name, m.value.lower()):
                return m
        raise PanelValueError(f"unknown match type {text!r}")


@dataclass(frozen=True)
class PmmSettings:
    k: int = 5
    match_type: MatchType = MatchType.BOTH_STAR

    def __post_init__(self):
        if int(self.k) < 1:
            raise PanelValueError(f"donor pool size k must be >= 1, got {self.k}")
        object.__setattr__(self, "match_type", MatchType.parse(self.match_type))


@dataclass(frozen=True)
class PmmStep:
    rows: np.ndarray        # recipient row indices, ascending
    values: np.ndarray      # imputed values, aligned with rows
    donors: np.ndarray      # donor row indices, aligned with rows
    column_mean: float
    column_sd: float
    imputed_mean: float
    imputed_sd: float

    def as_map(self) -> dict[int, float]:
        return {int(r): float(v) for r, v in zip(self.rows, self.values)}


def _sd(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def standardized_design(predictors: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Intercept plus predictors centred and scaled on the observed rows.

    Scaling keeps the relative pivot test meaningful when predictors differ by
    orders of magnitude; a predictor that is constant on the observed rows
    becomes an all-zero column and fails the pivot test.
    """
    P = np.asarray(predictors, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    out = np.empty((P.shape[0], P.shape[1] + 1))
    out[:, 0] = 1.0
    if P.shape[1]:
        sub = P[observed]
        mu = sub.mean(axis=0)
        sd = sub.std(axis=0)
        sd[sd == 0.0] = 1.0
        out[:, 1:] = (P - mu) / sd
    return out


def _first_true(pred, n: int, size: int) -> np.ndarray:
    """Per-row first index in [0, n] where the monotone ``pred(i)`` holds."""
    lo = np.zeros(size, dtype=np.intp)
    hi = np.full(size, n, dtype=np.intp)
    while True:
        active = lo < hi
        if not active.any():
            return lo
        mid = (lo + hi) // 2
        ok = pred(np.minimum(mid, n - 1)) & active
        hi = np.where(ok, mid, hi)
        lo = np.where(active & ~ok, mid + 1, lo)


def select_donors(pred_donors: np.ndarray, pred_recipients: np.ndarray, k: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Index into ``pred_donors`` of the donor chosen for each recipient.

    The pool is every donor at distance <= the k-th smallest distance, ties
    included. Sorted by prediction the pool is a contiguous run, so its bounds
    come from a bisection on the exact distance test.
    """
    n_obs = pred_donors.shape[0]
    n_rec = pred_recipients.shape[0]
    kk = min(int(k), n_obs)
    u = rng.random(n_rec)
    order = np.argsort(pred_donors, kind="stable")
    s = pred_donors[order]
    r = pred_recipients
    # the kk nearest sit within kk places of the insertion point
    pos = np.searchsorted(s, r)
    win = pos[:, None] + np.arange(-kk, kk)[None, :]
    valid = (win >= 0) & (win < n_obs)
    dist = np.where(valid, np.abs(r[:, None] - s[np.clip(win, 0, n_obs - 1)]), np.inf)
    kth = np.partition(dist, kk - 1, axis=1)[:, kk - 1]
    lo = _first_true(lambda i: (s[i] >= r) | (np.abs(r - s[i]) <= kth), n_obs, n_rec)
    hi = _first_true(lambda i: (s[i] > r) & (np.abs(r - s[i]) > kth), n_obs, n_rec)
    counts = hi - lo
    pick = np.minimum((u * counts).astype(np.intp), counts - 1)
    return order[lo + pick]


def pmm_step(y: np.ndarray, observed: np.ndarray, predictors: np.ndarray,
             settings: PmmSettings, rng: np.random.Generator, *,
             ridge_rescue: bool = False, target: str | None = None) -> PmmStep:
    """Impute the unobserved entries of ``y`` from the fully filled ``predictors``."""
    y = np.asarray(y, dtype=np.float64)
    observed = np.asarray(observed, dtype=bool)
    missing_rows = np.flatnonzero(~observed)
    if missing_rows.size == 0:
        col = y
        return PmmStep(missing_rows, np.empty(0), np.empty(0, dtype=np.intp),
                       float(col.mean()) if col.size else float("nan"), _sd(col), float("nan"), 0.0)
    X = standardized_design(predictors, observed)
    q = X.shape[1]
    obs_rows = np.flatnonzero(observed)
    if obs_rows.size < q + 2:
        raise InsufficientData(f"{obs_rows.size} observed rows for {q} parameters (need {q + 2})",
                               target=target)
    X_obs, X_mis, y_obs = X[obs_rows], X[missing_rows], y[obs_rows]
    try:
        fit = fit_ols(X_obs, y_obs, ridge_rescue=ridge_rescue)
    except (CollinearityError, InsufficientData) as exc:
        raise type(exc)(exc.detail, target=target) from exc
    draw = draw_posterior(fit, rng)
    if settings.match_type is MatchType.BOTH_STAR:
        pred_donors = X_obs @ draw.beta_star
    else:
        pred_donors = X_obs @ fit.beta_hat
    pred_recipients = X_mis @ draw.beta_star
    pick = select_donors(pred_donors, pred_recipients, settings.k, rng)
    values = y_obs[pick]
    filled = y.copy()
    filled[missing_rows] = values
    return PmmStep(
        rows=missing_rows,
        values=values,
        donors=obs_rows[pick],
        column_mean=float(filled.mean()),
        column_sd=_sd(filled),
        imputed_mean=float(values.mean()),
        imputed_sd=_sd(values),
    )


def impute_variable_pmm(current: PanelDataset, target: str, predictors: Sequence[str],
                        settings: PmmSettings, rng: np.random.Generator, *,
                        ridge_rescue: bool = False):
    """PMM for ``target`` in a dataset whose predictor columns are fully observed.

    Returns ``(imputations, step)``: a ``{row index: value}`` map for the
    target's missing rows, and the :class:`PmmStep` with column statistics.
    """
    j = current.var_index(target)
    cols = [current.var_index(c) for c in predictors]
    if target in predictors:
        raise PanelValueError(f"{target} cannot predict itself")
    incomplete = [c for c, k in zip(predictors, cols) if not current.mask[:, k].all()]
    if incomplete:
        raise PanelValueError(f"predictors must be fully filled, incomplete: {incomplete}")
    step = pmm_step(current.values[:, j], current.mask[:, j], current.values[:, cols],
                    settings, rng, ridge_rescue=ridge_rescue, target=target)
    return step.as_map(), step
