"""Least squares via Cholesky of X'X, plus the noninformative-prior posterior draw.

Random draws use a caller-owned :class:`numpy.random.Generator`:
``Generator.chisquare`` for the residual scale, then ``Generator.standard_normal``
for the coefficient perturbation, in that order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import CollinearityError, InsufficientData, ShapeMismatchError

# smallest admissible Cholesky pivot, relative to the largest diagonal of X'X
PIVOT_TOLERANCE = 1e-10
RIDGE_SCALE = 1e-6


@dataclass(frozen=True)
class RegressionFit:
    beta_hat: np.ndarray
    sigma2_hat: float
    # upper-triangular F with F F' = (X'X)^-1
    xtx_inverse_factor: np.ndarray
    n_obs: int
    q: int
    ridge: float = 0.0

    @property
    def df(self) -> int:
        return self.n_obs - self.q

    def coef_variance(self) -> np.ndarray:
        """Diagonal of sigma2_hat * (X'X)^-1."""
        return self.sigma2_hat * np.sum(self.xtx_inverse_factor ** 2, axis=1)


@dataclass(frozen=True)
class PosteriorDraw:
    beta_star: np.ndarray
    sigma_star: float


def cholesky_checked(xtx: np.ndarray, tol: float = PIVOT_TOLERANCE) -> np.ndarray:
    """Lower Cholesky factor, or CollinearityError when a pivot falls below tolerance.

    A pivot is the squared diagonal entry of the factor.
    """
    scale = float(np.max(np.diag(xtx))) if xtx.size else 0.0
    if not np.all(np.isfinite(xtx)) or scale <= 0.0:
        raise CollinearityError("X'X is not positive definite (degenerate design)")
    try:
        chol = np.linalg.cholesky(xtx)
    except np.linalg.LinAlgError:
        raise CollinearityError("X'X is not positive definite") from None
    pivots = np.diag(chol) ** 2
    k = int(np.argmin(pivots))
    if pivots[k] < tol * scale:
        raise CollinearityError(
            f"X'X is not positive definite: pivot {k} is {pivots[k]:.3g}, "
            f"below {tol:g} x max diagonal {scale:.3g}")
    return chol


def fit_ols(design, response, ridge_rescue: bool = False) -> RegressionFit:
    """Fit y = X b by the normal equations.

    With ``ridge_rescue`` a failed factorization is retried once on
    X'X + lam I, lam = 1e-6 trace(X'X) / q.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"design {X.shape} and response {y.shape} do not conform")
    n, q = X.shape
    if q < 1:
        raise ShapeMismatchError("design has no columns")
    if n <= q:
        raise InsufficientData(f"{n} observations for {q} parameters")
    xtx = X.T @ X
    ridge = 0.0
    try:
        chol = cholesky_checked(xtx)
    except CollinearityError:
        if not ridge_rescue:
            raise
        ridge = RIDGE_SCALE * float(np.trace(xtx)) / q
        xtx = xtx + ridge * np.eye(q)
        chol = cholesky_checked(xtx)
    xty = X.T @ y
    beta = solve_triangular(chol.T, solve_triangular(chol, xty, lower=True), lower=False)
    resid = y - X @ beta
    rss = float(resid @ resid)
    # a residual at rounding level is an exact fit
    if rss <= n * (64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(y))))) ** 2:
        rss = 0.0
    chol_inv = solve_triangular(chol, np.eye(q), lower=True)
    return RegressionFit(
        beta_hat=beta,
        sigma2_hat=rss / (n - q),
        xtx_inverse_factor=chol_inv.T,
        n_obs=n,
        q=q,
        ridge=ridge,
    )


def draw_posterior(fit: RegressionFit, rng: np.random.Generator) -> PosteriorDraw:
    """sigma*^2 = sigma2_hat (n-q) / g, g ~ chi2(n-q); beta* = beta_hat + F z sigma*."""
    if fit.sigma2_hat == 0.0:
        return PosteriorDraw(beta_star=fit.beta_hat.copy(), sigma_star=0.0)
    g = rng.chisquare(fit.df)
    sigma_star = float(np.sqrt(fit.sigma2_hat * fit.df / g))
    z = rng.standard_normal(fit.q)
    return PosteriorDraw(
        beta_star=fit.beta_hat + fit.xtx_inverse_factor @ z * sigma_star,
        sigma_star=sigma_star,
    )


def predict(beta, design) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    X = np.asarray(design, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != beta.shape[0]:
        raise ShapeMismatchError(f"design has {X.shape[1]} columns, beta has {beta.shape[0]}")
    return X @ beta
