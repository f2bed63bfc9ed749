"""Quality checks for completed panels.

Four views of how a completed dataset relates to the observed one:
descriptive statistics, kernel-density overlap, pairwise correlations, and
split-chain potential scale reduction over the chain traces. This module only
computes; pass/fail thresholds belong to the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import PanelDataset
from .errors import PanelValueError, ShapeMismatchError

GRID_POINTS = 512
DEFAULT_RHAT_THRESHOLD = 1.2
DEFAULT_DISCARD = 0.5


# -- descriptive comparison ---------------------------------------------------

@dataclass(frozen=True)
class Describe:
    n: int
    mean: float
    sd: float
    min: float
    max: float

    @classmethod
    def of(cls, x: np.ndarray) -> "Describe":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return cls(0, math.nan, math.nan, math.nan, math.nan)
        sd = float(np.std(x, ddof=1)) if x.size > 1 else math.nan
        return cls(int(x.size), float(x.mean()), sd, float(x.min()), float(x.max()))


@dataclass(frozen=True)
class DescriptiveRow:
    code: str
    completed: Describe
    observed: Describe
    missing_fraction: float

    @property
    def mean_diff(self) -> float:
        """|completed mean - observed mean| / observed sd (0 when both agree exactly)."""
        delta = abs(self.completed.mean - self.observed.mean)
        if delta == 0.0:
            return 0.0
        sd = self.observed.sd
        return delta / sd if sd and sd > 0 else math.inf

    @property
    def sd_ratio(self) -> float:
        """completed sd / observed sd (1 when both are zero)."""
        a, b = self.completed.sd, self.observed.sd
        if a == b:
            return 1.0
        return a / b if b and b > 0 else math.inf


@dataclass(frozen=True)
class DescriptiveComparison:
    rows: tuple[DescriptiveRow, ...]

    def __getitem__(self, code) -> DescriptiveRow:
        for r in self.rows:
            if r.code == code:
                return r
        raise KeyError(code)

    HEADER = ("variable", "obs", "mean", "sd", "min", "max",
              "obs_observed", "mean_observed", "sd_observed", "min_observed", "max_observed",
              "missing_pct", "mean_diff", "sd_ratio")

    def table(self):
        for r in self.rows:
            c, o = r.completed, r.observed
            yield (r.code, c.n, c.mean, c.sd, c.min, c.max, o.n, o.mean, o.sd, o.min, o.max,
                   100.0 * r.missing_fraction, r.mean_diff, r.sd_ratio)


def _check_grid(observed: PanelDataset, completed: PanelDataset):
    if observed.rows != completed.rows or observed.codes != completed.codes:
        raise ShapeMismatchError("observed and completed datasets differ in rows or variables")


def describe_compare(observed: PanelDataset, completed: PanelDataset,
                     variables: Sequence[str] | None = None) -> DescriptiveComparison:
    _check_grid(observed, completed)
    codes = observed.codes if variables is None else variables
    rows = []
    for code in codes:
        j = observed.var_index(code)
        obs = observed.values[observed.mask[:, j], j]
        comp = completed.values[completed.mask[:, j], j]
        rows.append(DescriptiveRow(code, Describe.of(comp), Describe.of(obs),
                                   1.0 - obs.size / observed.n_rows))
    return DescriptiveComparison(tuple(rows))


# -- kernel densities -----------------------------------------------------------

@dataclass(frozen=True)
class Density:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def at(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.density, left=0.0, right=0.0)


def silverman_bandwidth(values) -> float:
    """0.9 min(sd, IQR/1.34) n^(-1/5); falls back to sd when the IQR is zero."""
    x = np.asarray(values, dtype=float)
    if x.size < 2 or np.unique(x).size < 2:
        raise PanelValueError("automatic bandwidth needs at least two distinct values")
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** (-0.2)


def kde(values, bandwidth="auto", grid="auto") -> Density:
    """Gaussian kernel density on 512 uniform points over [min - 3h, max + 3h] by default."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise PanelValueError("kde of an empty sample")
    h = silverman_bandwidth(x) if isinstance(bandwidth, str) else float(bandwidth)
    if not h > 0:
        raise PanelValueError(f"bandwidth must be positive, got {h}")
    if isinstance(grid, str):
        g = np.linspace(x.min() - 3 * h, x.max() + 3 * h, GRID_POINTS)
    else:
        g = np.asarray(grid, dtype=float)
    dens = np.zeros_like(g)
    norm = 1.0 / (x.size * h * math.sqrt(2 * math.pi))
    # chunk over the sample to bound memory
    step = max(1, (1 << 22) // max(g.size, 1))
    for lo in range(0, x.size, step):
        z = (g[:, None] - x[None, lo:lo + step]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    return Density(g, dens * norm, h)


def common_grid(*samples, points: int = GRID_POINTS) -> np.ndarray:
    """Uniform grid spanning every sample's automatic kde support."""
    lo, hi = math.inf, -math.inf
    for s in samples:
        h = silverman_bandwidth(s)
        lo = min(lo, float(np.min(s)) - 3 * h)
        hi = max(hi, float(np.max(s)) + 3 * h)
    return np.linspace(lo, hi, points)


def ovl(d1: Density, d2: Density) -> float:
    """Overlap coefficient: trapezoid integral of min(d1, d2) on a shared grid."""
    if d1.grid.shape == d2.grid.shape and np.array_equal(d1.grid, d2.grid):
        grid, a, b = d1.grid, d1.density, d2.density
    else:
        lo = min(d1.grid[0], d2.grid[0])
        hi = max(d1.grid[-1], d2.grid[-1])
        grid = np.linspace(lo, hi, max(d1.grid.size, d2.grid.size))
        a, b = d1.at(grid), d2.at(grid)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise PanelValueError("densities could not be resampled to a common grid")
    return float(min(1.0, max(0.0, np.trapezoid(np.minimum(a, b), grid))))


@dataclass(frozen=True)
class DensityPair:
    code: str
    grid: np.ndarray
    observed: np.ndarray
    completed: np.ndarray
    imputed: np.ndarray | None      # None when fewer than two distinct imputed values
    ovl_completed: float
    ovl_imputed: float

    def table(self):
        imp = self.imputed if self.imputed is not None else np.full_like(self.grid, np.nan)
        return zip(self.grid, self.observed, self.completed, imp)


def density_pair(observed: PanelDataset, completed: PanelDataset, code: str) -> DensityPair:
    j = observed.var_index(code)
    obs = observed.values[observed.mask[:, j], j]
    comp = completed.values[:, completed.var_index(code)]
    imp = comp[~observed.mask[:, j]]
    has_imp = imp.size >= 2 and np.unique(imp).size >= 2
    grid = common_grid(obs, comp, *([imp] if has_imp else []))
    d_obs = kde(obs, grid=grid)
    d_comp = kde(comp, grid=grid)
    d_imp = kde(imp, grid=grid) if has_imp else None
    return DensityPair(code, grid, d_obs.density, d_comp.density,
                       None if d_imp is None else d_imp.density,
                       ovl(d_obs, d_comp), ovl(d_obs, d_imp) if d_imp is not None else math.nan)


# -- correlations ------------------------------------------------------------------

def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    den = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if den == 0.0:
        return math.nan
    return float(np.clip((dx @ dy) / den, -1.0, 1.0))


def pairwise_complete_corr(values: np.ndarray, mask: np.ndarray, min_rows: int = 3):
    """Pearson correlations over jointly observed rows.

    Returns ``(corr, available)``; an entry is unavailable (NaN) with fewer
    than ``min_rows`` joint rows or zero variance on them.
    """
    p = values.shape[1]
    corr = np.full((p, p), np.nan)
    for i in range(p):
        for k in range(i, p):
            both = mask[:, i] & mask[:, k]
            if both.sum() < min_rows:
                continue
            r = 1.0 if i == k else pearson(values[both, i], values[both, k])
            corr[i, k] = corr[k, i] = r
    available = ~np.isnan(corr)
    np.fill_diagonal(corr, 1.0)
    np.fill_diagonal(available, True)
    return corr, available


@dataclass(frozen=True)
class CorrelationComparison:
    variables: tuple[str, ...]
    observed: np.ndarray
    completed: np.ndarray
    available: np.ndarray
    diff: np.ndarray
    sign_flips: int

    @property
    def max_abs_diff(self) -> float:
        d = self.diff[self.available]
        return float(np.max(d)) if d.size else 0.0

    def layered(self) -> np.ndarray:
        """Observed correlations above the diagonal, completed below."""
        out = np.triu(self.observed, 1) + np.tril(self.completed, -1)
        np.fill_diagonal(out, 1.0)
        return out


def corr_compare(observed: PanelDataset, completed: PanelDataset,
                 variables: Sequence[str] | None = None,
                 flip_threshold: float = 0.1) -> CorrelationComparison:
    _check_grid(observed, completed)
    codes = tuple(observed.codes if variables is None else variables)
    idx = [observed.var_index(c) for c in codes]
    obs_corr, available = pairwise_complete_corr(observed.values[:, idx], observed.mask[:, idx])
    comp = completed.values[:, idx]
    p = len(codes)
    comp_corr = np.eye(p)
    for i in range(p):
        for k in range(i + 1, p):
            comp_corr[i, k] = comp_corr[k, i] = pearson(comp[:, i], comp[:, k])
    diff = np.abs(obs_corr - comp_corr)
    diff[~available] = np.nan
    np.fill_diagonal(diff, 0.0)
    flips = 0
    for i in range(p):
        for k in range(i + 1, p):
            ro, rc = obs_corr[i, k], comp_corr[i, k]
            if available[i, k] and abs(ro) > flip_threshold and np.sign(ro) != np.sign(rc):
                flips += 1
    return CorrelationComparison(codes, obs_corr, comp_corr, available, diff, flips)


# -- convergence ---------------------------------------------------------------------

def split_rhat(chains: np.ndarray, discard: float = DEFAULT_DISCARD) -> float:
    """Split-chain potential scale reduction of an (m, T) array of chain series.

    The first ``floor(discard * T)`` iterations are dropped; each chain's
    remainder is cut into two halves of length T' (the middle draw is dropped
    when the remainder is odd).
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatchError("chains must be a 2-d (chain, iteration) array")
    m, T = x.shape
    kept = x[:, int(math.floor(discard * T)):]
    if kept.shape[1] < 4:
        raise PanelValueError(f"need >= 4 retained iterations, have {kept.shape[1]}")
    if m < 2:
        raise PanelValueError("need at least two chains")
    half = kept.shape[1] // 2
    halves = np.concatenate([kept[:, :half], kept[:, -half:]], axis=0)
    w = float(np.mean(np.var(halves, axis=1, ddof=1)))
    b = half * float(np.var(halves.mean(axis=1), ddof=1))
    if w == 0.0:
        return 1.0 if b == 0.0 else math.inf
    return math.sqrt(((half - 1) / half * w + b / half) / w)


@dataclass(frozen=True)
class ConvergenceStat:
    code: str
    rhat_mean: float
    rhat_sd: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.rhat_mean < self.threshold and self.rhat_sd < self.threshold


def convergence_stat(traces, code: str, discard: float = DEFAULT_DISCARD,
                     threshold: float = DEFAULT_RHAT_THRESHOLD) -> ConvergenceStat:
    means, sds = traces.series(code)
    return ConvergenceStat(code, split_rhat(means, discard), split_rhat(sds, discard), threshold)


def comparison_index(m: int) -> int:
    """0-based index of the default comparison imputation, ceil(m/2) in 1-based terms."""
    return max(1, math.ceil(m / 2)) - 1
