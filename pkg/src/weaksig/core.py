"""Data containers, standardization, least squares and noise-scale estimation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._cd import coordinate_descent
from ._normal import norm_ppf
from .errors import ConfigError, ConvergenceError, ConvergenceWarning, SingularDesignError

#: Largest Gram condition number accepted by :func:`ols_fit`.
GRAM_CONDITION_LIMIT = 1e12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Column-standardized regression data.

    Attributes
    ----------
    X : ndarray, shape (n, p)
        Design matrix whose columns satisfy ``X_j' X_j = n``.
    y : ndarray, shape (n,)
        Response (centered when ``y_center`` is nonzero).
    x_scale : ndarray, shape (p,)
        Divisors applied to the (optionally centered) raw columns.  A
        coefficient on the standardized scale equals the raw-scale
        coefficient times ``x_scale``.
    x_center, y_center
        Means removed before scaling (zeros when no centering was applied).
    """

    X: np.ndarray
    y: np.ndarray
    x_scale: np.ndarray = None
    x_center: np.ndarray = None
    y_center: float = 0.0

    def __post_init__(self):
        X = _frozen(self.X)
        y = _frozen(self.y).reshape(-1)
        if X.ndim != 2:
            raise ConfigError("X must be a two-dimensional array")
        n, p = X.shape
        if y.shape[0] != n:
            raise ConfigError(f"X has {n} rows but y has {y.shape[0]} entries")
        if n < 2 or p < 1:
            raise ConfigError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        norms = np.einsum("ij,ij->j", X, X)
        bad = np.flatnonzero(np.abs(norms - n) > 1e-8 * n)
        if bad.size:
            raise ConfigError(
                f"column {int(bad[0])} is not standardized: squared norm {norms[bad[0]]:.6g} != n={n}"
            )
        scale = np.ones(p) if self.x_scale is None else self.x_scale
        center = np.zeros(p) if self.x_center is None else self.x_center
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x_scale", _frozen(scale))
        object.__setattr__(self, "x_center", _frozen(center))
        object.__setattr__(self, "y_center", float(self.y_center))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def to_original_units(self, values) -> np.ndarray:
        """Map standardized-scale coefficients (or interval endpoints) back to raw units."""
        return np.asarray(values, dtype=float) / self.x_scale

    def gram(self) -> np.ndarray:
        """Return ``X'X / n``."""
        return self.X.T @ self.X / self.n


@dataclass(frozen=True)
class FitResult:
    """Least-squares and adaptive-Lasso fits of one dataset.

    ``lam`` is the tuning parameter (``lambda`` is reserved in Python).
    """

    theta_ls: np.ndarray
    theta_al: np.ndarray
    lam: float
    sigma_hat: float
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "theta_ls", _frozen(self.theta_ls))
        object.__setattr__(self, "theta_al", _frozen(self.theta_al))
        if self.theta_ls.shape != self.theta_al.shape:
            raise ConfigError("theta_ls and theta_al must have the same length")
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if not self.sigma_hat > 0:
            raise ConfigError(f"sigma_hat must be positive, got {self.sigma_hat}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "sigma_hat", float(self.sigma_hat))

    @property
    def active(self) -> np.ndarray:
        """Indices of nonzero adaptive-Lasso coefficients."""
        return np.flatnonzero(self.theta_al != 0)


def standardize(raw_X, raw_y, center: bool = False) -> Dataset:
    """Scale the columns of ``raw_X`` so that each has squared norm ``n``.

    Parameters
    ----------
    raw_X : array_like, shape (n, p)
    raw_y : array_like, shape (n,)
    center : bool
        Subtract column means from ``raw_X`` and the mean from ``raw_y``
        before scaling.  Without centering, the columns are only rescaled.

    Raises
    ------
    ConfigError
        If dimensions disagree or a column has zero variance after
        centering; the message names the offending column index.
    """
    X = np.array(raw_X, dtype=float)
    y = np.array(raw_y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if y.shape[0] != n:
        raise ConfigError(f"raw_X has {n} rows but raw_y has {y.shape[0]} entries")
    spread = X.max(axis=0) - X.min(axis=0)
    flat = np.flatnonzero(spread == 0)
    if flat.size:
        raise ConfigError(f"column {int(flat[0])} has zero variance after centering")
    x_center = X.mean(axis=0) if center else np.zeros(p)
    y_center = float(y.mean()) if center else 0.0
    Xc = X - x_center
    scale = np.sqrt(np.einsum("ij,ij->j", Xc, Xc) / n)
    Xs = Xc / scale
    # Remove last-bit drift so the invariant holds tightly.
    Xs *= np.sqrt(n / np.einsum("ij,ij->j", Xs, Xs))
    return Dataset(Xs, y - y_center, x_scale=scale, x_center=x_center, y_center=y_center)


def _checked_gram(X: np.ndarray) -> np.ndarray:
    gram = X.T @ X
    eig = np.linalg.eigvalsh(gram)
    smallest = float(max(eig[0], 0.0))
    if smallest <= 0 or eig[-1] / smallest > GRAM_CONDITION_LIMIT:
        raise SingularDesignError(
            f"X'X is singular or ill-conditioned (smallest eigenvalue {smallest:.3e}, "
            f"condition limit {GRAM_CONDITION_LIMIT:.0e})",
            smallest_singular_value=smallest,
        )
    return gram


def ols_fit(d: Dataset) -> np.ndarray:
    """Ordinary least-squares coefficients ``(X'X)^{-1} X'y``.

    Raises
    ------
    SingularDesignError
        When the Gram matrix condition number exceeds ``1e12``.
    """
    gram = _checked_gram(d.X)
    return np.linalg.solve(gram, d.X.T @ d.y)


def ols_cov_unscaled(d: Dataset) -> np.ndarray:
    """Return ``(X'X)^{-1}``, the OLS covariance divided by ``sigma^2``."""
    gram = _checked_gram(d.X)
    return np.linalg.inv(gram)


def quantile_lambda0(n: int, p: int, tol: float = 1e-3) -> float:
    """Quantile-based scaled-Lasso penalty level ``sqrt(2/n) L``.

    ``L = Phi^{-1}(1 - k/p)`` with ``k = L^4 + 2 L^2``, solved by damped
    fixed-point iteration (Sun and Zhang, 2013).
    """
    if p == 1:
        return math.sqrt(2.0 / n) * 0.5
    L, old = 0.1, 0.0
    while abs(L - old) > tol:
        k = L**4 + 2 * L**2
        old = L
        L = 0.5 * (float(-norm_ppf(min(k / p, 0.99))) + old)
    return math.sqrt(2.0 / n) * L


def estimate_sigma(
    d: Dataset,
    method: str = "scaled_lasso",
    tol: float = 1e-6,
    max_iter: int = 100,
    lam0: str | float = "universal",
) -> float:
    """Estimate the noise standard deviation.

    Parameters
    ----------
    d : Dataset
    method : {"scaled_lasso", "ols"}
        ``"scaled_lasso"`` alternates a Lasso fit at penalty
        ``sigma * lam0`` with ``sigma^2 = ||y - X theta||^2 / n`` until the
        relative change of ``sigma`` is below ``tol``, or until ``sigma``
        falls below ``1e-10`` times the response scale (an exact fit).
        ``"ols"`` returns the residual estimator ``sqrt(RSS / (n - p))``
        and needs ``n > p + 1``.
    lam0 : {"universal", "quantile"} or float
        Scaled-Lasso penalty level: ``sqrt(2 log p / n)``, the quantile-based
        level of :func:`quantile_lambda0`, or an explicit value.
    tol, max_iter
        Stopping rule of the scaled-Lasso iteration.  On exhausting
        ``max_iter`` the last iterate is returned with a
        :class:`~weaksig.errors.ConvergenceWarning`.

    Returns
    -------
    float
        A positive noise-scale estimate.
    """
    n, p = d.n, d.p
    if method == "ols":
        if n <= p + 1:
            raise ConfigError(f"the OLS residual estimator needs n > p + 1 (n={n}, p={p})")
        theta = ols_fit(d)
        resid = d.y - d.X @ theta
        return float(np.sqrt(resid @ resid / (n - p)))
    if method != "scaled_lasso":
        raise ConfigError(f"unknown sigma estimator {method!r}")

    if lam0 == "universal":
        lam0 = math.sqrt(2.0 * math.log(p) / n)
    elif lam0 == "quantile":
        lam0 = quantile_lambda0(n, p)
    elif isinstance(lam0, str):
        raise ConfigError(f"unknown lambda0 rule {lam0!r}")
    G = d.gram()
    c = (d.X.T @ d.y / n)[None, :]
    sigma = float(np.sqrt(d.y @ d.y / n))
    tiny = np.finfo(float).tiny
    if sigma == 0.0:
        return tiny
    floor = 1e-10 * sigma
    theta = np.zeros((1, p))
    for _ in range(max_iter):
        try:
            theta, _ = coordinate_descent(G, c, np.full(p, lam0 * sigma), theta0=theta)
        except ConvergenceError as exc:  # keep the last iterate, as documented
            theta = exc.last_iterate
        resid = d.y - d.X @ theta[0]
        new_sigma = float(np.sqrt(resid @ resid / n))
        if new_sigma <= floor:
            return max(new_sigma, tiny)
        if abs(new_sigma - sigma) < tol * new_sigma:
            return new_sigma
        sigma = new_sigma
    warnings.warn(
        f"scaled-Lasso sigma estimate did not converge in {max_iter} iterations",
        ConvergenceWarning,
        stacklevel=2,
    )
    return sigma
