"""Detection probabilities and the noise / weak / strong classification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._normal import as_float, norm_cdf, z_upper
from .core import FitResult
from .errors import ConfigError, NoRootError


@dataclass(frozen=True)
class TheoryConfig:
    """The quintuple ``(n, sigma, lam, alpha, tau)`` behind every closed form.

    Parameters
    ----------
    n : int
        Sample size.
    sigma : float
        Noise standard deviation.
    lam : float
        Adaptive-Lasso tuning parameter.
    alpha : float
        Nominal miscoverage level of the intervals.
    tau : float
        Tolerated false-positive rate of the noise / weak split.
    """

    n: int
    sigma: float
    lam: float
    alpha: float = 0.05
    tau: float = 0.05

    def __post_init__(self):
        if not (self.n >= 1 and self.sigma > 0 and self.lam >= 0):
            raise ConfigError(f"invalid (n, sigma, lambda) = ({self.n}, {self.sigma}, {self.lam})")
        if not (0 < self.alpha < 1 and 0 < self.tau < 1):
            raise ConfigError(f"alpha and tau must lie in (0, 1), got {self.alpha}, {self.tau}")

    @property
    def s(self) -> float:
        """Standard deviation ``sigma / sqrt(n)`` of an orthogonal-design OLS coefficient."""
        return self.sigma / math.sqrt(self.n)

    @property
    def sqrt_lam(self) -> float:
        return math.sqrt(self.lam)

    @property
    def z_alpha(self) -> float:
        """``z_{alpha/2}``."""
        return float(z_upper(self.alpha / 2))

    @property
    def z_tau(self) -> float:
        """``z_{tau/2}``."""
        return float(z_upper(self.tau / 2))

    @property
    def tau0(self) -> float:
        """Minimal detection probability ``2 Phi(-sqrt(n lam) / sigma)``."""
        return float(2 * norm_cdf(-math.sqrt(self.n * self.lam) / self.sigma))

    @property
    def nu0(self) -> float:
        return self.sqrt_lam

    @property
    def nu1(self) -> float:
        return self.z_tau * self.s

    @property
    def nu2(self) -> float:
        return self.sqrt_lam + self.z_alpha * self.s

    @property
    def nu3(self) -> float:
        return (self.z_alpha + self.z_tau) * self.s

    @property
    def nu4(self) -> float:
        return self.sqrt_lam + 2 * self.z_alpha * self.s

    # -- regularity conditions -------------------------------------------
    def c1_holds(self) -> bool:
        """``tau >= alpha``."""
        return self.tau >= self.alpha

    def c2_holds(self) -> bool:
        """``tau < 2 Phi(-z_{alpha/2} / 2) - alpha``."""
        return self.tau < 2 * float(norm_cdf(-self.z_alpha / 2)) - self.alpha

    def lambda_criterion_holds(self) -> bool:
        """``sqrt(lam) >= z_{alpha/2} sigma / sqrt(n)``."""
        return self.sqrt_lam >= self.z_alpha * self.s

    def regime(self) -> int:
        """1 when ``sqrt(lam) < nu3``, else 2."""
        return 1 if self.sqrt_lam < self.nu3 else 2

    def violations(self, lambda_criterion: bool = True) -> list[str]:
        """Human-readable list of violated conditions."""
        out = []
        if not self.c1_holds():
            out.append(f"(C1) tau >= alpha fails: tau={self.tau}, alpha={self.alpha}")
        if not self.c2_holds():
            bound = 2 * float(norm_cdf(-self.z_alpha / 2)) - self.alpha
            out.append(f"(C2) tau < 2*Phi(-z/2) - alpha = {bound:.6f} fails: tau={self.tau}")
        if lambda_criterion and not self.lambda_criterion_holds():
            out.append(
                f"lambda criterion sqrt(lambda) >= z*sigma/sqrt(n) fails: "
                f"{self.sqrt_lam:.6g} < {self.z_alpha * self.s:.6g}"
            )
        return out

    def validate(self, lambda_criterion: bool = True) -> None:
        """Raise :class:`ConfigError` listing every violated condition."""
        bad = self.violations(lambda_criterion)
        if bad:
            raise ConfigError("; ".join(bad))


def detection_prob(theta, cfg: TheoryConfig):
    """Probability that the orthogonal-design adaptive Lasso keeps a coefficient.

    ``P_d(theta) = Phi((theta - sqrt(lam))/s) + Phi((-theta - sqrt(lam))/s)``
    with ``s = sigma / sqrt(n)``.  Vectorized over ``theta``.
    """
    t = np.asarray(theta, dtype=float)
    s, r = cfg.s, cfg.sqrt_lam
    return as_float(norm_cdf((t - r) / s) + norm_cdf((-t - r) / s))


def estimated_detection_prob(theta_ls, cfg: TheoryConfig):
    """Plug-in detection probability evaluated at the OLS estimate."""
    return detection_prob(theta_ls, cfg)


def expected_detection_prob(theta, cfg: TheoryConfig):
    """Mean of the plug-in detection probability when ``theta_ls ~ N(theta, s^2)``.

    Equals ``Phi(sqrt(n)(theta - sqrt(lam))/(sqrt(2) sigma))
    + Phi(-sqrt(n)(theta + sqrt(lam))/(sqrt(2) sigma))``, using
    ``E Phi((Z - a)/s) = Phi((mu - a)/(sqrt(2) s))`` for ``Z ~ N(mu, s^2)``
    on each term.  It is even in ``theta``.
    """
    t = np.asarray(theta, dtype=float)
    k = math.sqrt(2) * cfg.s
    r = cfg.sqrt_lam
    return as_float(norm_cdf((t - r) / k) + norm_cdf(-(t + r) / k))


def bisect(f, lo: float, hi: float, xtol: float = 1e-15, max_iter: int = 400) -> float:
    """Root of an increasing function ``f`` on ``[lo, hi]`` by bisection.

    Raises
    ------
    NoRootError
        If ``f(lo) > 0`` or ``f(hi) < 0``; the error carries the endpoints
        and their function values.
    """
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise NoRootError(
            f"no sign change on [{lo:.10g}, {hi:.10g}]: f = ({flo:.3e}, {fhi:.3e})",
            endpoints=(lo, hi),
            values=(flo, fhi),
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def nu_for_gamma(gamma: float, cfg: TheoryConfig) -> float:
    """Positive ``nu`` with ``P_d(nu) = gamma``.

    Raises
    ------
    NoRootError
        When ``gamma <= tau0`` (no positive solution) or ``gamma >= 1``.
    """
    tau0 = cfg.tau0
    if not (tau0 < gamma < 1):
        raise NoRootError(f"gamma={gamma} must lie in (tau0, 1) with tau0={tau0:.6g}")
    hi = cfg.sqrt_lam + 10 * cfg.s
    while detection_prob(hi, cfg) < gamma:
        hi *= 2
    return bisect(lambda v: detection_prob(v, cfg) - gamma, 0.0, hi)


@dataclass(frozen=True)
class SignalClassification:
    """Partition of coefficient indices into noise, weak and strong sets.

    ``nu1``/``nu2`` are the thresholds at the reference scale
    ``sigma/sqrt(n)`` and ``gamma_k = P_d(nu_k)``.  When the classification
    used per-coefficient standard errors, ``nu1_by_index`` and
    ``nu2_by_index`` hold the thresholds actually applied.
    """

    noise_set: frozenset
    weak_set: frozenset
    strong_set: frozenset
    nu1: float
    nu2: float
    gamma1: float
    gamma2: float
    nu1_by_index: tuple | None = None
    nu2_by_index: tuple | None = None

    def label(self, index: int) -> str:
        if index in self.strong_set:
            return "strong"
        if index in self.weak_set:
            return "weak"
        return "noise"


def classify(fit: FitResult, cfg: TheoryConfig, se=None) -> SignalClassification:
    """Split coefficients by ``|theta_ls|`` against ``nu1 = z_{tau/2} s`` and ``nu2 = sqrt(lam) + z_{alpha/2} s``.

    Noise when ``|theta_ls| <= nu1``, weak when ``nu1 < |theta_ls| <= nu2``,
    strong otherwise.  ``gamma_k = P_d(nu_k)``.

    Parameters
    ----------
    fit : FitResult
    cfg : TheoryConfig
        Supplies ``sigma/sqrt(n)``, ``lam``, ``alpha`` and ``tau``.
    se : array_like, optional
        Per-coefficient standard errors of ``theta_ls``.  When given, ``s``
        is replaced by ``se[i]`` for coefficient ``i``.  Under an orthogonal
        design ``se[i] = sigma/sqrt(n)`` and both forms coincide.

    Raises
    ------
    ConfigError
        If ``nu1 >= nu2``.
    """
    nu1, nu2 = cfg.nu1, cfg.nu2
    if not nu1 < nu2:
        raise ConfigError(f"nu1={nu1:.6g} must be below nu2={nu2:.6g}; check tau >= alpha")
    a = np.abs(fit.theta_ls)
    if se is None:
        t1 = np.full(a.shape, nu1)
        t2 = np.full(a.shape, nu2)
    else:
        se = np.asarray(se, dtype=float)
        t1 = cfg.z_tau * se
        t2 = cfg.sqrt_lam + cfg.z_alpha * se
    noise = frozenset(int(i) for i in np.flatnonzero(a <= t1))
    strong = frozenset(int(i) for i in np.flatnonzero(a > t2))
    weak = frozenset(int(i) for i in np.flatnonzero((a > t1) & (a <= t2)))
    return SignalClassification(
        noise,
        weak,
        strong,
        nu1,
        nu2,
        float(detection_prob(nu1, cfg)),
        float(detection_prob(nu2, cfg)),
        None if se is None else tuple(float(v) for v in t1),
        None if se is None else tuple(float(v) for v in t2),
    )
