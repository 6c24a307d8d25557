"""Adaptive-Lasso estimation and BIC tuning."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._cd import coordinate_descent
from .core import Dataset, FitResult, ols_fit
from .errors import ConfigError

#: Number of points on the default tuning grid.
GRID_SIZE = 100
#: Decades spanned by the default tuning grid below ``lambda_max``.
GRID_DECADES = 4.0


def alasso_soft_threshold(theta_ls, lam):
    """Orthogonal-design adaptive-Lasso solution.

    Returns ``(|t| - lam/|t|)_+ * sign(t)`` for ``t = theta_ls``; the result
    is zero whenever ``t == 0`` or ``|t| <= sqrt(lam)``.  Vectorized.
    """
    t = np.asarray(theta_ls, dtype=float)
    lam = float(lam)
    if lam < 0:
        raise ConfigError(f"lambda must be nonnegative, got {lam}")
    a = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        shrunk = np.where(a > 0, a - lam / np.where(a > 0, a, 1.0), 0.0)
    out = np.where(a * a > lam, np.maximum(shrunk, 0.0), 0.0) * np.sign(t)
    return float(out) if out.ndim == 0 else out


def penalty_weights(theta_ls, lam) -> np.ndarray:
    """Per-coordinate penalty ``lam / |theta_ls_j|`` (``inf`` for a zero OLS entry)."""
    a = np.abs(np.asarray(theta_ls, dtype=float))
    with np.errstate(divide="ignore"):
        pen = np.where(a > 0, float(lam) / np.where(a > 0, a, 1.0), np.inf)
    return pen


def alasso_objective(d: Dataset, theta, lam: float, theta_ls) -> float:
    """Evaluate ``(1/2n)||y - X theta||^2 + lam * sum_j |theta_j| / |theta_ls_j|``.

    Coordinates with ``theta_ls_j = 0`` contribute ``inf`` unless
    ``theta_j = 0``.
    """
    theta = np.asarray(theta, dtype=float)
    r = d.y - d.X @ theta
    w = np.abs(np.asarray(theta_ls, dtype=float))
    pen = 0.0
    for tj, wj in zip(theta, w):
        if tj == 0:
            continue
        pen += np.inf if wj == 0 else abs(tj) / wj
    return float(r @ r / (2 * d.n) + lam * pen)


def alasso_fit(d: Dataset, lam: float, sigma_hat: float, theta_ls=None, tol: float = 1e-8) -> FitResult:
    """Minimize the adaptive-Lasso objective by coordinate descent.

    Parameters
    ----------
    d : Dataset
    lam : float
        Nonnegative tuning parameter.
    sigma_hat : float
        Noise-scale estimate carried along in the result.
    theta_ls : array_like, optional
        Precomputed OLS coefficients used for the weights.
    tol : float
        Stop when the largest coordinate change in a sweep is below ``tol``.

    Raises
    ------
    ConvergenceError
        After 10,000 sweeps; the exception carries the last iterate.
    """
    if lam < 0:
        raise ConfigError(f"lambda must be nonnegative, got {lam}")
    if theta_ls is None:
        theta_ls = ols_fit(d)
    theta_ls = np.asarray(theta_ls, dtype=float)
    pen = penalty_weights(theta_ls, lam)
    c = (d.X.T @ d.y / d.n)[None, :]
    theta, sweeps = coordinate_descent(d.gram(), c, pen[None, :], tol=tol)
    return FitResult(theta_ls, theta[0], lam, sigma_hat, extras={"sweeps": sweeps})


def alasso_path(d: Dataset, lambdas, theta_ls, tol: float = 1e-8) -> np.ndarray:
    """Fit every ``lambda`` in ``lambdas`` at once; returns shape ``(len(lambdas), p)``."""
    lambdas = np.asarray(lambdas, dtype=float)
    w = np.abs(np.asarray(theta_ls, dtype=float))
    with np.errstate(divide="ignore"):
        inv_w = np.where(w > 0, 1.0 / np.where(w > 0, w, 1.0), np.inf)
    pen = lambdas[:, None] * inv_w[None, :]
    pen = np.where(np.isinf(inv_w)[None, :], np.inf, pen)
    c = np.broadcast_to(d.X.T @ d.y / d.n, pen.shape)
    theta, _ = coordinate_descent(d.gram(), c, pen, tol=tol)
    return theta


def lambda_grid(d: Dataset, theta_ls, size: int = GRID_SIZE, decades: float = GRID_DECADES) -> np.ndarray:
    """Log-spaced decreasing grid from ``lambda_max`` down ``decades`` decades.

    ``lambda_max = (max_j |X_j'y|/n) * max_j |theta_ls_j|`` zeroes every
    coordinate under the adaptive weights.
    """
    lam_max = float(np.max(np.abs(d.X.T @ d.y)) / d.n * np.max(np.abs(theta_ls)))
    if lam_max <= 0:
        raise ConfigError("lambda_max is zero: the response is orthogonal to every column")
    return lam_max * np.logspace(0.0, -decades, size)


@dataclass(frozen=True)
class TuningGrid:
    """BIC evaluation over a strictly decreasing grid of tuning parameters."""

    lambdas: np.ndarray
    bic_values: np.ndarray
    selected_index: int
    coefs: np.ndarray
    nonzeros: np.ndarray

    @property
    def selected_lambda(self) -> float:
        return float(self.lambdas[self.selected_index])

    @property
    def selected_theta(self) -> np.ndarray:
        return self.coefs[self.selected_index]


def bic_values(d: Dataset, sigma_hat: float, lambdas, coefs, theta_ls) -> np.ndarray:
    """BIC of each fitted coefficient vector in ``coefs`` (rows match ``lambdas``)."""
    n = d.n
    XtX = d.X.T @ d.X
    lambdas = np.asarray(lambdas, dtype=float)
    diff = coefs - theta_ls[None, :]
    quad = np.einsum("kj,jl,kl->k", diff, XtX, diff)
    nz = coefs != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(nz, 1.0 / np.abs(coefs * theta_ls[None, :]), 0.0)
    quad = quad + n * lambdas * np.sum(omega * diff**2, axis=1)
    q = nz.sum(axis=1)
    return quad / (n * sigma_hat**2) + q * np.log(n) / n


def bic_select(d: Dataset, sigma_hat: float, lambdas=None, theta_ls=None) -> TuningGrid:
    """Choose ``lambda`` by minimizing BIC over a grid.

    Parameters
    ----------
    d : Dataset
    sigma_hat : float
        Noise-scale estimate entering the BIC weight matrix.
    lambdas : array_like, optional
        Candidate values; duplicates are merged and the grid is sorted in
        decreasing order.  Defaults to :func:`lambda_grid`.
    theta_ls : array_like, optional
        Precomputed OLS coefficients.

    Notes
    -----
    Ties resolve to the larger ``lambda``.  If every candidate yields the
    all-zero fit, the smallest ``lambda`` is selected and a warning issued.
    """
    if theta_ls is None:
        theta_ls = ols_fit(d)
    theta_ls = np.asarray(theta_ls, dtype=float)
    if lambdas is None:
        lambdas = lambda_grid(d, theta_ls)
    lambdas = np.unique(np.asarray(lambdas, dtype=float))[::-1]
    if lambdas.size == 0:
        raise ConfigError("empty tuning grid")
    if lambdas[-1] < 0:
        raise ConfigError("tuning grid contains a negative lambda")
    coefs = alasso_path(d, lambdas, theta_ls)
    bic = bic_values(d, sigma_hat, lambdas, coefs, theta_ls)
    nonzeros = (coefs != 0).sum(axis=1)
    if np.all(nonzeros == 0):
        warnings.warn("every grid point gives the all-zero fit; selecting the smallest lambda", stacklevel=2)
        idx = lambdas.size - 1
    else:
        idx = int(np.argmin(bic))
    for a in (lambdas, bic, coefs, nonzeros):
        a.setflags(write=False)
    return TuningGrid(lambdas, bic, idx, coefs, nonzeros)


def fit_with_bic(d: Dataset, sigma_hat: float, theta_ls=None) -> FitResult:
    """OLS, BIC tuning and the adaptive-Lasso fit at the selected ``lambda``."""
    if theta_ls is None:
        theta_ls = ols_fit(d)
    grid = bic_select(d, sigma_hat, theta_ls=theta_ls)
    return FitResult(
        theta_ls,
        grid.selected_theta,
        grid.selected_lambda,
        sigma_hat,
        extras={"grid": grid},
    )
