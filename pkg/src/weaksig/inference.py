"""Bias, covariance and the two-step confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._normal import z_upper
from .core import Dataset, FitResult, ols_cov_unscaled
from .errors import ConfigError, SingularDesignError
from .signal import SignalClassification, TheoryConfig, classify

ASYMPTOTIC = "Asymptotic"
LEAST_SQUARE = "LeastSquare"


@dataclass(frozen=True)
class IntervalReport:
    """Confidence interval ``center +/- half_width`` for one coefficient."""

    index: int
    rule: str
    center: float
    half_width: float
    bias: float
    se: float
    alpha: float

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def covers(self, value: float) -> bool:
        return self.lower < value < self.upper

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "rule": self.rule,
            "center": self.center,
            "half_width": self.half_width,
            "lower": self.lower,
            "upper": self.upper,
            "bias": self.bias,
            "se": self.se,
            "alpha": self.alpha,
        }


def _active_array(fit: FitResult, active) -> np.ndarray:
    idx = np.array(sorted(int(i) for i in active), dtype=int)
    if idx.size and np.any(fit.theta_al[idx] == 0):
        bad = int(idx[np.flatnonzero(fit.theta_al[idx] == 0)[0]])
        raise ConfigError(f"coefficient {bad} is zero but listed as active")
    if idx.size and np.any(fit.theta_ls[idx] == 0):
        bad = int(idx[np.flatnonzero(fit.theta_ls[idx] == 0)[0]])
        raise ConfigError(f"coefficient {bad} has a zero OLS estimate")
    return idx


def _solve_checked(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eig[0] <= 0 or eig[-1] / eig[0] > 1e12:
        raise SingularDesignError(
            f"matrix is singular or ill-conditioned (smallest eigenvalue {eig[0]:.3e})",
            smallest_singular_value=float(max(eig[0], 0.0)),
        )
    return np.linalg.solve(M, rhs)


def alasso_bias(fit: FitResult, active, d: Dataset | None = None) -> np.ndarray:
    """Bias estimate of the adaptive-Lasso coefficients on ``active``.

    General form ``(X_A'X_A/n)^{-1} (lam / |theta_ls_j| * sign(theta_j))_j``.
    With ``d=None`` an orthogonal design is assumed and the bias is
    ``lam / |theta_ls_i| * sign(theta_i)`` coordinatewise.

    Returns the vector in the sorted order of ``active``.
    """
    idx = _active_array(fit, active)
    if idx.size == 0:
        return np.zeros(0)
    g = fit.lam / np.abs(fit.theta_ls[idx]) * np.sign(fit.theta_al[idx])
    if d is None:
        return g
    XA = d.X[:, idx]
    return _solve_checked(XA.T @ XA / d.n, g)


def alasso_covariance(
    fit: FitResult, active, d: Dataset | None = None, bias_corrected: bool = True
) -> np.ndarray:
    """Sandwich covariance of the adaptive-Lasso coefficients on ``active``.

    ``M^{-1} X_A'X_A M^{-1} sigma_hat^2`` with
    ``M = X_A'X_A + n lam Omega`` and
    ``Omega = diag(1 / (|theta_ls_i| |theta_i|))``.  With ``bias_corrected``
    the bias-corrected coefficient ``theta_i + b_i`` replaces ``theta_i`` in
    ``Omega``.  With ``d=None`` an orthogonal design (``X'X = nI``) of size
    ``n = fit.extras['n']`` is assumed.
    """
    idx = _active_array(fit, active)
    if idx.size == 0:
        return np.zeros((0, 0))
    theta = fit.theta_al[idx]
    if bias_corrected:
        theta = theta + alasso_bias(fit, idx, d)
    if d is None:
        n = fit.extras.get("n")
        if n is None:
            raise ConfigError("orthogonal covariance needs fit.extras['n'] or a dataset")
        gram = n * np.eye(idx.size)
    else:
        n = d.n
        XA = d.X[:, idx]
        gram = XA.T @ XA
    omega = 1.0 / (np.abs(fit.theta_ls[idx]) * np.abs(theta))
    M = gram + n * fit.lam * np.diag(omega)
    left = _solve_checked(M, gram)
    cov = _solve_checked(M, left.T).T * fit.sigma_hat**2
    return 0.5 * (cov + cov.T)


def asymptotic_intervals(fit: FitResult, d: Dataset, alpha: float, indices=None) -> list[IntervalReport]:
    """Bias-corrected asymptotic intervals for selected coefficients.

    Bias and covariance are computed on the full active set of ``fit``;
    intervals are reported for ``indices`` (default: every active index).
    """
    act = fit.active
    if indices is None:
        indices = act
    z = float(z_upper(alpha / 2))
    if act.size == 0:
        return []
    bias = alasso_bias(fit, act, d)
    cov = alasso_covariance(fit, act, d)
    se = np.sqrt(np.diag(cov))
    pos = {int(j): k for k, j in enumerate(act)}
    out = []
    for i in sorted(int(i) for i in indices):
        if i not in pos:
            continue
        k = pos[i]
        out.append(
            IntervalReport(i, ASYMPTOTIC, float(fit.theta_al[i] + bias[k]), z * float(se[k]), float(bias[k]), float(se[k]), alpha)
        )
    return out


def least_square_intervals(fit: FitResult, d: Dataset, alpha: float, indices) -> list[IntervalReport]:
    """Full-model OLS intervals ``theta_ls_i +/- z sigma_hat sqrt((X'X)^{-1}_ii)``."""
    z = float(z_upper(alpha / 2))
    diag = np.diag(ols_cov_unscaled(d))
    out = []
    for i in sorted(int(i) for i in indices):
        se = fit.sigma_hat * math.sqrt(diag[i])
        out.append(IntervalReport(i, LEAST_SQUARE, float(fit.theta_ls[i]), z * se, 0.0, se, alpha))
    return out


def ols_standard_errors(d: Dataset, sigma_hat: float) -> np.ndarray:
    """Full-model OLS standard errors ``sigma_hat sqrt((X'X)^{-1}_ii)``."""
    return sigma_hat * np.sqrt(np.diag(ols_cov_unscaled(d)))


def classify_design(fit: FitResult, cfg: TheoryConfig, d: Dataset) -> SignalClassification:
    """Classify with thresholds scaled by the full-model OLS standard errors of ``d``."""
    return classify(fit, cfg, se=ols_standard_errors(d, fit.sigma_hat))


def build_intervals(
    fit: FitResult, cls: SignalClassification, cfg: TheoryConfig, d: Dataset
) -> list[IntervalReport]:
    """Two-step intervals: asymptotic for strong, least-square for weak, none for noise.

    A strong coefficient whose adaptive-Lasso estimate is exactly zero (this
    can happen only under a correlated design) receives the least-square
    interval, since the bias-corrected form is undefined there.
    """
    alpha = cfg.alpha
    strong = set(cls.strong_set)
    selected = set(int(i) for i in fit.active)
    asym = asymptotic_intervals(fit, d, alpha, sorted(strong & selected))
    ls = least_square_intervals(fit, d, alpha, sorted(set(cls.weak_set) | (strong - selected)))
    return sorted(asym + ls, key=lambda r: r.index)
