"""Synthetic panels with known truth, for tests, benchmarks and the example scripts.

``reference_panel`` mimics the reference layout: 82 countries x 15
years, 47 targets in six capacity groups with realistic missingness counts,
eight complete auxiliaries. Values follow a country-level latent-factor model,
so targets are mutually predictable, skewed where the real indicators are.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .baselines import logistic_intercept
from .datamodel import Capacity, PanelDataset, Role, VariableMeta

# (code, capacity, direction, observed cells out of 1230, skewed)
REFERENCE_TARGETS = [
    ("tscitjar", Capacity.TECHNOLOGY, 1, 1148, True),
    ("tippay", Capacity.TECHNOLOGY, 1, 818, True),
    ("tsecedvoc", Capacity.TECHNOLOGY, 1, 571, True),
    ("trandd", Capacity.TECHNOLOGY, 1, 225, True),
    ("tresinrandd", Capacity.TECHNOLOGY, 1, 148, True),
    ("ttechinrandd", Capacity.TECHNOLOGY, 1, 144, True),
    ("thigexperofmanex", Capacity.TECHNOLOGY, 1, 547, True),
    ("teciscore", Capacity.TECHNOLOGY, 1, 892, False),
    ("ftaxrpergdp", Capacity.FINANCIAL, 1, 583, False),
    ("fcosbstpropergni", Capacity.FINANCIAL, -1, 1154, True),
    ("fdomcrprsebybkpergdp", Capacity.FINANCIAL, 1, 1100, True),
    ("ftdaystobusi", Capacity.FINANCIAL, -1, 1154, True),
    ("fdaystoenfcct", Capacity.FINANCIAL, -1, 1154, False),
    ("fdaystoregpro", Capacity.FINANCIAL, -1, 1104, True),
    ("fopenind", Capacity.FINANCIAL, 1, 847, False),
    ("fdaystoobteleconn", Capacity.FINANCIAL, -1, 153, True),
    ("fnewbusdenper1k", Capacity.FINANCIAL, 1, 583, True),
    ("faccownperofpop15p", Capacity.FINANCIAL, 1, 160, False),
    ("fcombkbr1k", Capacity.FINANCIAL, 1, 1099, True),
    ("hprimenrollpergross", Capacity.HUMAN, 1, 911, False),
    ("hsecenrollpergross", Capacity.HUMAN, 1, 711, False),
    ("hpupteapriratio", Capacity.HUMAN, -1, 751, False),
    ("hprimcompra", Capacity.HUMAN, 1, 735, False),
    ("hgvtxepedupergdp", Capacity.HUMAN, 1, 615, False),
    ("hhciscscale0to1", Capacity.HUMAN, 1, 154, False),
    ("hlfwithadedu", Capacity.HUMAN, 1, 265, False),
    ("hcompeduyears", Capacity.HUMAN, 1, 1028, False),
    ("hempindusperototem", Capacity.HUMAN, 1, 1125, False),
    ("hempserperototem", Capacity.HUMAN, 1, 1125, False),
    ("imobsbper100", Capacity.INFRASTRUCTURE, 1, 1219, False),
    ("iaccesselecperpop", Capacity.INFRASTRUCTURE, 1, 1135, False),
    ("ibdbandsbper100", Capacity.INFRASTRUCTURE, 1, 1114, True),
    ("itelesubper100", Capacity.INFRASTRUCTURE, 1, 1218, True),
    ("ienergusepercap", Capacity.INFRASTRUCTURE, 1, 471, True),
    ("ilpiquoftrataninfr", Capacity.INFRASTRUCTURE, 1, 372, False),
    ("iindintperpop", Capacity.INFRASTRUCTURE, 1, 1209, True),
    ("pcpiaeconmgtcl1to6", Capacity.PUBLIC_POLICY, 1, 1132, False),
    ("pcpiasmgandinscl1to6", Capacity.PUBLIC_POLICY, 1, 1132, False),
    ("pcpiastpolclav1to6", Capacity.PUBLIC_POLICY, 1, 1132, False),
    ("pscapsoravg", Capacity.PUBLIC_POLICY, 1, 1206, False),
    ("pstrengthoflegalright", Capacity.PUBLIC_POLICY, 1, 565, False),
    ("scpiabdhumanres1to6", Capacity.SOCIAL, 1, 1132, False),
    ("scpiaeqofpbresuse1to6", Capacity.SOCIAL, 1, 1132, False),
    ("scpiasocprorat1to6", Capacity.SOCIAL, 1, 1128, False),
    ("scpiapolsocinclcl1to6", Capacity.SOCIAL, 1, 1129, False),
    ("spovheadcnational", Capacity.SOCIAL, -1, 234, False),
    ("ssocialconperofrev", Capacity.SOCIAL, 1, 569, True),
]

REFERENCE_AUXILIARIES = ["gdppc", "techcoop", "population", "gcf", "oda", "tourism",
                         "mimphigh", "healthexp"]


@dataclass(frozen=True)
class SyntheticPanel:
    truth: PanelDataset
    observed: PanelDataset


def _country_codes(n):
    return [f"C{i:03d}" for i in range(n)]


def latent_panel(rng, n_countries, n_years, n_factors=3, persistence=0.8):
    """(n_countries * n_years, n_factors) latent scores; country effect plus AR(1) drift."""
    country = rng.standard_normal((n_countries, 1, n_factors))
    shocks = rng.standard_normal((n_countries, n_years, n_factors))
    drift = np.zeros_like(shocks)
    for t in range(n_years):
        prev = drift[:, t - 1] if t else 0.0
        drift[:, t] = persistence * prev + np.sqrt(1 - persistence ** 2) * shocks[:, t]
    trend = np.linspace(-0.3, 0.3, n_years)[None, :, None]
    return (country + 0.5 * drift + trend).reshape(n_countries * n_years, n_factors)


def _mar_mask(rng, driver, n_observed, strength=0.5):
    """Boolean observed-mask with exactly ``n_observed`` true cells, poorer rows missing more."""
    n = driver.size
    rate = 1.0 - n_observed / n
    if rate <= 0:
        return np.ones(n, dtype=bool)
    z = (driver - driver.mean()) / driver.std()
    p = expit(logistic_intercept(z, rate, slope=-strength) - strength * z)
    # exact count: keep the n_observed rows least likely to be deleted after a random draw
    score = rng.random(n) - p
    keep = np.argsort(-score, kind="stable")[:n_observed]
    mask = np.zeros(n, dtype=bool)
    mask[keep] = True
    return mask


def reference_panel(seed: int, n_countries: int = 82, years=range(2005, 2020),
                       targets=None, n_auxiliaries: int = 8, noise: float = 0.35,
                       mar_strength: float = 0.5) -> SyntheticPanel:
    rng = np.random.default_rng(seed)
    years = list(years)
    targets = REFERENCE_TARGETS if targets is None else targets
    n_rows = n_countries * len(years)
    f = latent_panel(rng, n_countries, len(years))
    k = f.shape[1]
    columns, metas = {}, []
    aux_codes = REFERENCE_AUXILIARIES[:n_auxiliaries] + [
        f"aux{i}" for i in range(len(REFERENCE_AUXILIARIES), n_auxiliaries)]
    for code in aux_codes:
        w = rng.normal(size=k)
        columns[code] = f @ w + 0.3 * rng.standard_normal(n_rows)
        metas.append(VariableMeta(code, capacity=Capacity.AUXILIARY, role=Role.AUXILIARY))
    for code, cap, direction, n_obs, skewed in targets:
        w = rng.normal(size=k)
        x = f @ w * direction + noise * rng.standard_normal(n_rows)
        x = x / np.std(x)
        if skewed:
            x = np.exp(0.8 * x)
        scale = 10.0 ** rng.uniform(-1, 3)
        columns[code] = scale * x
        metas.append(VariableMeta(code, capacity=cap, direction=direction, role=Role.TARGET))
    countries = _country_codes(n_countries)
    rows = tuple((c, y) for c in countries for y in years)
    values = np.column_stack([columns[m.code] for m in metas])
    truth = PanelDataset(rows=rows, variables=tuple(metas), values=values,
                         mask=np.ones(values.shape, dtype=bool))
    mask = truth.mask.copy()
    driver = columns[aux_codes[0]] if aux_codes else f[:, 0]
    scale_obs = n_rows / 1230.0
    for j, meta in enumerate(metas):
        if meta.role is not Role.TARGET:
            continue
        n_obs = next(t[3] for t in targets if t[0] == meta.code)
        mask[:, j] = _mar_mask(rng, driver, int(round(n_obs * scale_obs)), mar_strength)
    return SyntheticPanel(truth, truth.replace(mask=mask))


def correlated_panel(seed: int, n_rows: int, corr: np.ndarray, codes=None,
                     lognormal=(), n_years: int = 10) -> PanelDataset:
    """Complete panel of multivariate-normal columns; ``lognormal`` columns are exponentiated."""
    rng = np.random.default_rng(seed)
    corr = np.asarray(corr, dtype=float)
    p = corr.shape[0]
    codes = list(codes) if codes is not None else [f"x{i + 1}" for i in range(p)]
    z = rng.standard_normal((n_rows, p)) @ np.linalg.cholesky(corr).T
    for c in lognormal:
        j = codes.index(c)
        z[:, j] = np.exp(z[:, j])
    rows = tuple((f"C{i // n_years:04d}", 2000 + i % n_years) for i in range(n_rows))
    metas = tuple(VariableMeta(c, capacity=Capacity.AUXILIARY, role=Role.TARGET) for c in codes)
    return PanelDataset(rows=rows, variables=metas, values=z, mask=np.ones(z.shape, dtype=bool))


def equicorrelation(p: int, rho: float) -> np.ndarray:
    return np.full((p, p), rho) + (1 - rho) * np.eye(p)


@dataclass(frozen=True)
class ScreeningFixture:
    panel: SyntheticPanel
    failures: tuple[str, ...]       # too few observed cells to fit any imputation model
    noise: tuple[str, ...]          # mostly missing and unrelated to every predictor
    shifted: tuple[str, ...]        # missing not at random, so completed moments drift


def _append(ds: PanelDataset, metas, values, mask) -> PanelDataset:
    return ds.replace(variables=ds.variables + tuple(metas),
                      values=np.column_stack([ds.values, values]),
                      mask=np.column_stack([ds.mask, mask]))


def screening_panel(seed: int, n_extra: int = 12) -> ScreeningFixture:
    """Reference panel widened to 64 candidate targets with planted bad variables.

    Three targets keep only 2-3% of their cells, one 80%-missing target is
    pure noise (high fraction of missing information) and one is deleted
    wherever its own value is high.
    """
    rng = np.random.default_rng([seed, 64])
    groups = list(Capacity)[:6]
    extra = [(f"xtra{i:02d}", groups[i % 6], 1, int(rng.integers(700, 1200)), bool(i % 2))
             for i in range(n_extra)]
    base = reference_panel(seed, targets=REFERENCE_TARGETS + extra)
    truth, obs = base.truth, base.observed
    n = truth.n_rows
    donor = truth.values[:, truth.var_index("tscitjar")]
    cols, masks, metas = [], [], []

    def plant(code, cap, values, mask):
        metas.append(VariableMeta(code, capacity=cap))
        cols.append(values)
        masks.append(mask)

    def keep_only(k):
        m = np.zeros(n, dtype=bool)
        m[rng.choice(n, size=k, replace=False)] = True
        return m

    plant("dupsparse", Capacity.TECHNOLOGY, donor.copy(), keep_only(int(0.02 * n)))
    plant("gapsparse", Capacity.FINANCIAL, rng.lognormal(size=n), keep_only(int(0.03 * n)))
    one_country = np.zeros(n, dtype=bool)
    one_country[:10] = True
    plant("onecountry", Capacity.SOCIAL, rng.normal(size=n), one_country)
    plant("noisevar", Capacity.HUMAN, rng.normal(size=n), rng.random(n) >= 0.8)
    sig = truth.values[:, truth.var_index("imobsbper100")]
    shifted = sig + 0.05 * sig.std() * rng.standard_normal(n)
    z = (shifted - shifted.mean()) / shifted.std()
    plant("mnarshift", Capacity.INFRASTRUCTURE, shifted, ~(rng.random(n) < expit(3.0 * z)))

    values = np.column_stack(cols)
    truth2 = _append(truth, metas, values, np.ones_like(values, dtype=bool))
    observed2 = _append(obs, metas, values, np.column_stack(masks))
    return ScreeningFixture(SyntheticPanel(truth2, observed2),
                            failures=("dupsparse", "gapsparse", "onecountry"),
                            noise=("noisevar",), shifted=("mnarshift",))
