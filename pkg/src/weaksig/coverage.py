"""Exact finite-sample coverage of the asymptotic and two-step intervals.

All functions assume the orthogonal-design model in which
``theta_ls ~ N(theta, s^2)`` with ``s = sigma / sqrt(n)``, and are even in
``theta``.  Inputs may be scalars or arrays of ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._normal import as_float, norm_cdf, z_upper
from .errors import ConfigError, WeakSigError
from .signal import TheoryConfig, bisect


def sigma_tilde(theta, cfg: TheoryConfig):
    """Shrinkage-adjusted scale ``sigma / (1 + lam / theta^2)``; zero at ``theta = 0`` when ``lam > 0``."""
    t2 = np.asarray(theta, dtype=float) ** 2
    if cfg.lam == 0:
        return as_float(np.full_like(t2, cfg.sigma))
    return as_float(cfg.sigma * t2 / (t2 + cfg.lam))


def p_s(theta, nu, cfg: TheoryConfig):
    """``P(|theta_ls| > nu) = Phi((theta - nu)/s) + Phi((-theta - nu)/s)``."""
    t = np.asarray(theta, dtype=float)
    s = cfg.s
    return as_float(norm_cdf((t - nu) / s) + norm_cdf((-t - nu) / s))


def _cr_piecewise(t, nu, g, cfg: TheoryConfig):
    """Joint probability that ``theta`` lies in ``theta_ls +/- g s`` and ``|theta_ls| > nu``.

    ``g`` is the half-width in units of ``s`` and may vary with ``t``.
    """
    s = cfg.s
    h = g * s
    ps = norm_cdf((t - nu) / s) + norm_cdf((-t - nu) / s)
    first = (ps - 2 * norm_cdf(-g)) * (nu <= h)
    middle = norm_cdf(g) - norm_cdf((nu - t) / s)
    last = 1 - 2 * norm_cdf(-g)
    return np.where(t <= np.abs(nu - h), first, np.where(t <= nu + h, middle, last))


def cr_a(theta, nu, cfg: TheoryConfig):
    """Coverage mass of the asymptotic interval, ``P(theta in CI_a, |theta_ls| > nu)``.

    ``CI_a`` has half-width ``z_{alpha/2} sigma_tilde(theta) / sqrt(n)`` around
    ``theta_ls``.
    """
    t = np.abs(np.asarray(theta, dtype=float))
    g = cfg.z_alpha * sigma_tilde(t, cfg) / cfg.sigma
    return as_float(_cr_piecewise(t, float(nu), g, cfg))


def cr_b(theta, nu, cfg: TheoryConfig):
    """Coverage mass of the least-square interval, ``P(theta in CI_b, |theta_ls| > nu)``."""
    t = np.abs(np.asarray(theta, dtype=float))
    g = np.full_like(t, cfg.z_alpha)
    return as_float(_cr_piecewise(t, float(nu), g, cfg))


def _safe_ratio(num, den):
    den = np.asarray(den, dtype=float)
    if np.any(den <= 0):
        raise WeakSigError("selection probability underflowed to zero")
    return as_float(np.asarray(num) / den)


def cr1(theta, cfg: TheoryConfig):
    """Conditional coverage of the asymptotic interval given selection at ``sqrt(lam)``."""
    return _safe_ratio(cr_a(theta, cfg.nu0, cfg), p_s(theta, cfg.nu0, cfg))


def cr_two_step(theta, cfg: TheoryConfig):
    """Conditional coverage of the two-step interval given ``|theta_ls| > nu1``."""
    num = (
        np.asarray(cr_b(theta, cfg.nu1, cfg))
        + np.asarray(cr_a(theta, cfg.nu2, cfg))
        - np.asarray(cr_b(theta, cfg.nu2, cfg))
    )
    return _safe_ratio(num, p_s(theta, cfg.nu1, cfg))


def delta(theta, cfg: TheoryConfig):
    """Coverage advantage ``CR(theta) - CR_1(theta)``."""
    return as_float(np.asarray(cr_two_step(theta, cfg)) - np.asarray(cr1(theta, cfg)))


@dataclass(frozen=True)
class CoverageCurve:
    """Coverage of both methods on an increasing grid of ``theta``."""

    thetas: np.ndarray
    cr1: np.ndarray
    cr: np.ndarray
    delta: np.ndarray


def coverage_curve(thetas, cfg: TheoryConfig) -> CoverageCurve:
    thetas = np.asarray(thetas, dtype=float)
    a = np.asarray(cr1(thetas, cfg), dtype=float)
    b = np.asarray(cr_two_step(thetas, cfg), dtype=float)
    return CoverageCurve(thetas, a, b, b - a)


# ---------------------------------------------------------------------------
# Boundary points
# ---------------------------------------------------------------------------


def k_functions(cfg: TheoryConfig):
    """Root functions whose zeros are ``c1, c2, c3, c4``; all increasing in valid configs."""
    r, z, s, rn = cfg.sqrt_lam, cfg.z_alpha, cfg.s, math.sqrt(cfg.n)

    def st(t):
        return float(sigma_tilde(t, cfg))

    return {
        "c1": lambda t: t - r + z * st(t) / rn,
        "c2": lambda t: t - r - z * st(t) / rn,
        "c3": lambda t: t - r - z * s + z * st(t) / rn,
        "c4": lambda t: t - r - z * s - z * st(t) / rn,
    }


def boundary_brackets(cfg: TheoryConfig, strict: bool = True) -> dict:
    """Bracketing intervals for ``c1..c4``.

    With ``strict`` the narrow intervals that hold under (C1), (C2) and the
    lambda criterion are returned; otherwise wider intervals that bracket a
    sign change for any configuration.
    """
    r, zs, zt = cfg.sqrt_lam, cfg.z_alpha * cfg.s, cfg.z_tau * cfg.s
    if strict:
        return {
            "c1": (max(zs - zt, 0.0), r),
            "c2": (r + 0.5 * zs, r + zs),
            "c3": (r, r + 0.5 * zs),
            "c4": (r + 1.5 * zs, r + 2 * zs),
        }
    return {"c1": (0.0, r), "c2": (r, r + zs), "c3": (r, r + zs), "c4": (r + zs, r + 2 * zs)}


@dataclass(frozen=True)
class BoundaryPoints:
    """Knots ``c1..c4`` and thresholds ``nu0..nu4`` of the coverage functions."""

    c1: float
    c2: float
    c3: float
    c4: float
    nu0: float
    nu1: float
    nu2: float
    nu3: float
    nu4: float
    residuals: tuple = ()

    def ordered(self) -> bool:
        return self.c1 < self.c3 < self.c2 < self.c4

    def case(self) -> int:
        """Ordering case: 1-3 when ``sqrt(lam) < nu3``, 4-5 otherwise."""
        if self.nu0 < self.nu3:
            if self.nu3 <= self.c3:
                return 3
            if self.nu3 < self.c2:
                return 1
            return 2
        return 4 if self.nu3 < self.c1 else 5

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("c1", "c2", "c3", "c4", "nu0", "nu1", "nu2", "nu3", "nu4")}


def boundary_points(cfg: TheoryConfig, strict: bool = True) -> BoundaryPoints:
    """Solve for ``c1..c4`` by bisection (absolute residual at most ``1e-10``).

    Parameters
    ----------
    cfg : TheoryConfig
    strict : bool
        Require the lambda criterion and search inside the narrow brackets.
        With ``strict=False`` wide brackets are used so the knots can be
        located for exploratory configurations.

    Raises
    ------
    ConfigError
        ``strict`` and the lambda criterion fails.
    NoRootError
        A bracket does not contain a sign change; the error lists the
        evaluated endpoints.
    """
    if strict and not cfg.sqrt_lam > cfg.z_alpha * cfg.s:
        raise ConfigError("boundary points need sqrt(lambda) > z_{alpha/2} sigma / sqrt(n)")
    funcs = k_functions(cfg)
    brackets = boundary_brackets(cfg, strict)
    roots, res = {}, []
    for name in ("c1", "c2", "c3", "c4"):
        lo, hi = brackets[name]
        roots[name] = bisect(funcs[name], lo, hi)
        res.append(abs(funcs[name](roots[name])))
    return BoundaryPoints(
        nu0=cfg.nu0, nu1=cfg.nu1, nu2=cfg.nu2, nu3=cfg.nu3, nu4=cfg.nu4, residuals=tuple(res), **roots
    )


# ---------------------------------------------------------------------------
# Lower bounds on the coverage advantage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoremBound:
    """Lower bound on ``Delta`` at one ``theta`` with the region it came from."""

    bound: float
    region: str
    case: int


def bound_constants(alpha: float) -> dict:
    """Closed-form constants appearing in the piecewise bounds."""
    z = float(z_upper(alpha / 2))
    P = norm_cdf
    return {
        "c1_nu0": 2 / (1 + alpha) - 2 * P(0.5 * z),
        "nu0_m": -4 * (1 - alpha / 2) * P(-1.5 * z),
        "case1_a": -2 * P(-1.5 * z),
        "after_c2": -4 * (1 - alpha) / (2 - alpha) ** 2 * P(-2 * z) - alpha * (1 - alpha) / (2 - alpha),
        "case2_a": -2 * (1 - alpha) * P(-1.5 * z),
        "case2_b": -(1 - alpha) * P(-2 * z) / P(0.5 * z) ** 2,
        "case3": -alpha / 2,
        "c4_nu4": -(1 - alpha) * P(-1.5 * z) / P(1.5 * z) ** 2,
        "tail": -(1 - alpha) * P(-2 * z) / P(2 * z) ** 2,
        "t2_case4": 2 - alpha - 2 * P(0.5 * z),
        "t2_case5": P(-0.5 * z) - alpha / 2,
        "blanket": -alpha / 2,
    }


def theorem_bounds(theta: float, cfg: TheoryConfig, bp: BoundaryPoints | None = None) -> TheoremBound:
    """Piecewise lower bound on ``Delta(theta)`` and the region that supplies it.

    The regime is fixed by comparing ``sqrt(lam)`` with ``nu3``.  Regions are
    closed on the right, so a knot belongs to the region on its left.
    Negative ``theta`` is reflected.

    Raises
    ------
    ConfigError
        When (C1), (C2) or the lambda criterion fails.
    """
    cfg.validate(lambda_criterion=True)
    if bp is None:
        bp = boundary_points(cfg)
    t = abs(float(theta))
    a, tau = cfg.alpha, cfg.tau
    k = bound_constants(a)
    case = bp.case()
    if case <= 3:
        if t <= bp.c1:
            return TheoremBound(1 - a / tau, "[0,c1]", case)
        if t <= bp.nu0:
            return TheoremBound(k["c1_nu0"], "[c1,nu0]", case)
        if t <= min(bp.nu3, bp.c3):
            return TheoremBound(k["nu0_m"], "[nu0,min(nu3,c3)]", case)
        if t <= max(bp.nu3, bp.c2):
            if case == 1:
                if t <= bp.nu3:
                    return TheoremBound(k["case1_a"], "[c3,nu3]", case)
                return TheoremBound(k["after_c2"], "[nu3,c2]", case)
            if case == 2:
                if t <= bp.c2:
                    return TheoremBound(k["case2_a"], "[c3,c2]", case)
                return TheoremBound(k["case2_b"], "[c2,nu3]", case)
            return TheoremBound(k["case3"], "[nu3,c2]", case)
        if t <= bp.c4:
            return TheoremBound(k["after_c2"], "[max(nu3,c2),c4]", case)
        if t <= bp.nu4:
            return TheoremBound(k["c4_nu4"], "[c4,nu4]", case)
        return TheoremBound(k["tail"], "[nu4,inf)", case)
    if t <= min(bp.nu3, bp.c1):
        return TheoremBound(1 - a / tau, "[0,min(nu3,c1)]", case)
    if t <= bp.nu0:
        if case == 5 and t <= bp.nu3:
            return TheoremBound(k["t2_case5"], "[c1,nu3]", case)
        return TheoremBound(k["t2_case4"], "[nu3,nu0]", case)
    return TheoremBound(k["blanket"], "[nu0,inf)", case)


def theorem_bound_curve(thetas, cfg: TheoryConfig, bp: BoundaryPoints | None = None):
    """Vector of bounds and region labels over ``thetas``."""
    if bp is None:
        bp = boundary_points(cfg)
    out = [theorem_bounds(t, cfg, bp) for t in np.asarray(thetas, dtype=float)]
    return np.array([o.bound for o in out]), [o.region for o in out]


def default_grid(cfg: TheoryConfig, size: int = 2000) -> np.ndarray:
    """``size`` equally spaced points on ``[0, sqrt(lam) + 6 sigma/sqrt(n)]``."""
    return np.linspace(0.0, cfg.sqrt_lam + 6 * cfg.s, size)
