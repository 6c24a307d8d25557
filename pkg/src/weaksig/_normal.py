"""Standard normal distribution helpers.

Thin wrappers over :mod:`scipy.special` so that every module uses the same
CDF and quantile routines.
"""

from __future__ import annotations

import numpy as np
from scipy import special


def norm_cdf(x):
    """Standard normal CDF, vectorized."""
    return special.ndtr(x)


def norm_ppf(q):
    """Standard normal quantile function, vectorized."""
    return special.ndtri(q)


def z_upper(level):
    """Upper ``level``-quantile ``z`` such that ``P(Z > z) = level``."""
    return -special.ndtri(level)


def as_float(x):
    """Return a Python float for 0-d inputs and an array otherwise."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return arr
