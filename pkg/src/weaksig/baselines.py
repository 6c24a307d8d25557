"""Comparison intervals: full-model OLS and the pairs bootstrap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._cd import coordinate_descent
from ._normal import z_upper
from .core import GRAM_CONDITION_LIMIT, Dataset, estimate_sigma, ols_cov_unscaled, ols_fit
from .errors import ConfigError
from .inference import IntervalReport
from .rng import TAG_BOOTSTRAP, substream

OLS_RULE = "OLS"
BOOTSTRAP_RULE = "BootstrapPercentile"


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings of the pairs bootstrap.

    Parameters
    ----------
    replications : int
        Number of resamples (at least 100).
    seed : int
        Root seed; resamples of replicate ``r`` use the substream
        ``(seed, r, bootstrap-tag)``.
    interval_kind : str
        Only ``"percentile"`` is supported.
    max_redraws : int
        Attempts to replace a singular resample before it is dropped.
    """

    replications: int = 4000
    seed: int = 0
    interval_kind: str = "percentile"
    max_redraws: int = 50

    def __post_init__(self):
        if self.replications < 100:
            raise ConfigError(f"bootstrap needs at least 100 replications, got {self.replications}")
        if self.interval_kind != "percentile":
            raise ConfigError(f"unsupported bootstrap interval kind {self.interval_kind!r}")


@dataclass(frozen=True)
class BootstrapDraws:
    """Resampled coefficient vectors and the number of dropped resamples."""

    values: np.ndarray
    dropped: int


def ols_interval(d: Dataset, alpha: float, index: int, sigma_hat: float | None = None) -> IntervalReport:
    """Full-model OLS interval ``theta_ls_i +/- z_{alpha/2} sigma_hat sqrt((X'X)^{-1}_ii)``."""
    if sigma_hat is None:
        sigma_hat = estimate_sigma(d)
    theta = ols_fit(d)
    se = sigma_hat * math.sqrt(ols_cov_unscaled(d)[index, index])
    z = float(z_upper(alpha / 2))
    return IntervalReport(int(index), OLS_RULE, float(theta[index]), z * se, 0.0, se, alpha)


def percentile_interval(values, alpha: float) -> tuple[float, float]:
    """Empirical ``alpha/2`` and ``1 - alpha/2`` quantiles (inverse-CDF convention).

    With ``B`` values the endpoints are the order statistics of rank
    ``ceil(B alpha/2)`` and ``ceil(B (1 - alpha/2))``.
    """
    lo, hi = np.quantile(np.asarray(values, dtype=float), [alpha / 2, 1 - alpha / 2], method="inverted_cdf")
    return float(lo), float(hi)


def _good_resamples(G: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(G)
    small = eig[:, 0]
    return (small > 0) & (eig[:, -1] <= GRAM_CONDITION_LIMIT * np.where(small > 0, small, 1.0))


def _resample_grams(X, y, rows):
    Xb = X[rows]
    yb = y[rows]
    n = X.shape[0]
    G = np.einsum("bni,bnj->bij", Xb, Xb) / n
    c = np.einsum("bni,bn->bi", Xb, yb) / n
    return G, c


def bootstrap_distribution(
    d: Dataset,
    lam: float,
    cfg: BootstrapConfig,
    replicate: int = 0,
    pipeline=None,
    chunk: int = 500,
) -> BootstrapDraws:
    """Refit the adaptive Lasso at fixed ``lam`` on row-resampled data.

    Parameters
    ----------
    d : Dataset
    lam : float
        Tuning parameter held fixed across resamples.
    cfg : BootstrapConfig
    replicate : int
        Index of the outer Monte Carlo replicate (selects the RNG substream).
    pipeline : callable, optional
        ``pipeline(X, y) -> theta`` used instead of the built-in batched
        fixed-``lam`` refit.  It may raise to signal a singular resample.
    chunk : int
        Resamples processed together by the batched solver.

    Notes
    -----
    A singular or ill-conditioned resample is redrawn up to
    ``cfg.max_redraws`` times, then dropped and counted.
    """
    rng = np.random.default_rng(substream(cfg.seed, replicate, TAG_BOOTSTRAP))
    n, p = d.n, d.p
    B = cfg.replications
    rows = rng.integers(0, n, size=(B, n))
    out = np.full((B, p), np.nan)
    dropped = 0
    if pipeline is not None:
        for b in range(B):
            for attempt in range(cfg.max_redraws + 1):
                try:
                    out[b] = pipeline(d.X[rows[b]], d.y[rows[b]])
                    break
                except Exception:
                    rows[b] = rng.integers(0, n, size=n)
            else:
                dropped += 1
        keep = ~np.isnan(out).any(axis=1)
        return BootstrapDraws(out[keep], dropped)

    for start in range(0, B, chunk):
        sl = slice(start, min(start + chunk, B))
        r = rows[sl]
        G, c = _resample_grams(d.X, d.y, r)
        ok = _good_resamples(G)
        attempts = 0
        while not ok.all() and attempts < cfg.max_redraws:
            bad = np.flatnonzero(~ok)
            r[bad] = rng.integers(0, n, size=(bad.size, n))
            G[bad], c[bad] = _resample_grams(d.X, d.y, r[bad])
            ok[bad] = _good_resamples(G[bad])
            attempts += 1
        dropped += int((~ok).sum())
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            continue
        Gk, ck = G[idx], c[idx]
        theta_ls = np.linalg.solve(Gk, ck[..., None])[..., 0]
        a = np.abs(theta_ls)
        with np.errstate(divide="ignore"):
            pen = np.where(a > 0, lam / np.where(a > 0, a, 1.0), np.inf)
        theta, _ = coordinate_descent(Gk, ck, pen)
        block = out[sl]
        block[idx] = theta
        out[sl] = block
    keep = ~np.isnan(out).any(axis=1)
    return BootstrapDraws(out[keep], dropped)


def bootstrap_interval(
    d: Dataset,
    lam: float,
    cfg: BootstrapConfig,
    alpha: float,
    index: int,
    replicate: int = 0,
    pipeline=None,
    draws: BootstrapDraws | None = None,
) -> tuple[IntervalReport, int]:
    """Percentile bootstrap interval for coefficient ``index``.

    Returns the interval and the number of dropped resamples.  Pass
    ``draws`` to reuse a resampled distribution across coefficients.
    """
    if draws is None:
        draws = bootstrap_distribution(d, lam, cfg, replicate, pipeline)
    if draws.values.shape[0] == 0:
        raise ConfigError("every bootstrap resample was dropped")
    vals = draws.values[:, index]
    lo, hi = percentile_interval(vals, alpha)
    rep = IntervalReport(int(index), BOOTSTRAP_RULE, 0.5 * (lo + hi), 0.5 * (hi - lo), 0.0, float(np.std(vals)), alpha)
    return rep, draws.dropped
