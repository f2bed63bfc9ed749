"""Rubin's rules for scalar estimands."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import PanelValueError, ShapeMismatchError, CollinearityError, InsufficientData
from .linmodel import fit_ols

POOLED_HEADER = ["estimand", "q_bar", "u_bar", "b", "t", "r", "df", "lambda", "fmi", "re", "m"]


@dataclass(frozen=True)
class PooledEstimate:
    q_bar: float
    u_bar: float
    b: float
    t: float
    r: float
    df: float       # math.inf when b == 0
    lam: float
    fmi: float
    re: float
    m: int

    @property
    def se(self) -> float:
        return math.sqrt(self.t)

    def as_row(self, name: str) -> list:
        return [name, self.q_bar, self.u_bar, self.b, self.t, self.r, self.df,
                self.lam, self.fmi, self.re, self.m]

    def asdict(self) -> dict:
        return asdict(self)


def relative_efficiency(fmi: float, m: int) -> float:
    return 1.0 / (1.0 + fmi / m)


def pool(estimates: Iterable[tuple[float, float]]) -> PooledEstimate:
    """Combine (Q_i, U_i) pairs from m >= 2 completed-data analyses."""
    est = [(float(q), float(u)) for q, u in estimates]
    m = len(est)
    if m < 2:
        raise PanelValueError(f"pooling needs m >= 2 estimates, got {m}")
    q = np.array([e[0] for e in est])
    u = np.array([e[1] for e in est])
    if np.any(u < 0) or not np.all(np.isfinite(u)) or not np.all(np.isfinite(q)):
        raise PanelValueError("within-imputation variances must be finite and non-negative")
    q_bar = float(q.mean())
    u_bar = float(u.mean())
    b = float(np.sum((q - q_bar) ** 2) / (m - 1))
    inflate = (1.0 + 1.0 / m) * b
    t = u_bar + inflate
    if b == 0.0:
        return PooledEstimate(q_bar, u_bar, 0.0, u_bar, 0.0, math.inf, 0.0, 0.0, 1.0, m)
    if u_bar == 0.0:
        # all variance is between imputations: limits as r -> inf
        r, df = math.inf, float(m - 1)
        fmi = 1.0
    else:
        r = inflate / u_bar
        df = (m - 1) * (1.0 + 1.0 / r) ** 2
        fmi = (r + 2.0 / (df + 3.0)) / (r + 1.0)
    return PooledEstimate(
        q_bar=q_bar, u_bar=u_bar, b=b, t=t, r=r, df=df,
        lam=inflate / t, fmi=fmi, re=relative_efficiency(fmi, m), m=m,
    )


def pooled_regress(result, response: str, regressors: Sequence[str]):
    """OLS of ``response`` on an intercept and ``regressors`` in every completed dataset.

    Returns ``[(name, PooledEstimate), ...]`` with the intercept first, pooling
    each coefficient with its squared standard error.
    """
    if result.m < 2:
        raise PanelValueError(f"pooling needs m >= 2 completed datasets, got {result.m}")
    per_coef = [[] for _ in range(len(regressors) + 1)]
    for idx, ds in enumerate(result.completed):
        y = ds.values[:, ds.var_index(response)]
        X = np.column_stack([np.ones(ds.n_rows)] + [ds.values[:, ds.var_index(c)] for c in regressors])
        try:
            fit = fit_ols(X, y)
        except (CollinearityError, InsufficientData) as exc:
            raise type(exc)(f"completed dataset {idx + 1}: {exc.detail}") from exc
        var = fit.coef_variance()
        for j in range(X.shape[1]):
            per_coef[j].append((fit.beta_hat[j], var[j]))
    names = ["(intercept)", *regressors]
    return [(name, pool(p)) for name, p in zip(names, per_coef)]


def mean_estimate(values: np.ndarray) -> tuple[float, float]:
    """(mean, sample variance / n) of a complete column."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise ShapeMismatchError("need at least two values for a variance")
    return float(values.mean()), float(values.var(ddof=1) / n)


def per_variable_fmi(result, code: str) -> PooledEstimate:
    """Pool the estimand "mean of ``code``" across the completed datasets."""
    if code not in result.targets:
        raise PanelValueError(f"{code!r} is not an imputation target")
    if result.m < 2:
        raise PanelValueError(f"pooling needs m >= 2 completed datasets, got {result.m}")
    return pool(mean_estimate(ds.values[:, ds.var_index(code)]) for ds in result.completed)
