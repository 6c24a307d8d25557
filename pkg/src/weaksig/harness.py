"""Monte Carlo harness: data generation, replicate evaluation and aggregation."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .alasso import alasso_fit, fit_with_bic
from .baselines import BootstrapConfig, bootstrap_interval
from .core import Dataset, estimate_sigma, ols_fit, standardize
from .coverage import CoverageCurve, coverage_curve, sigma_tilde
from .errors import ConvergenceError, SingularDesignError, WeakSigError
from .inference import asymptotic_intervals, build_intervals, classify_design, least_square_intervals
from .rng import TAG_DATA, TAG_ORACLE, generator
from .signal import TheoryConfig, classify

METHODS = ("two_step", "asymptotic", "ols")
#: Fraction of dropped replicates above which a run fails.
MAX_DROP_FRACTION = 0.10


@dataclass(frozen=True)
class SimulationScenario:
    """One simulation design.

    Parameters
    ----------
    n, p : int
        Sample size and number of predictors.
    sigma : float
        Noise standard deviation.
    rho : float
        AR(1) correlation between neighbouring columns.
    theta_star : tuple of float
        True coefficients on the raw scale.
    theta_varying_index : int
        Coefficient whose value is swept over ``theta_grid`` and whose
        intervals are scored.
    theta_grid : tuple of float
        Values substituted at ``theta_varying_index``; empty means use
        ``theta_star`` as given.
    replications : int
    tau, alpha : float
    seed : int
    name : str
    methods : tuple of str
        Subset of ``("two_step", "asymptotic", "ols", "bootstrap")``.
    bootstrap_replications : int
        Resamples per replicate for the bootstrap method.
    orthogonalize : bool
        Replace the design by an exactly orthogonal one (``X'X = nI``).
    fixed_lambda : float, optional
        Skip BIC tuning and use this value.
    known_sigma : bool
        Use the true ``sigma`` instead of an estimate.
    sigma_method : str
        Estimator passed to :func:`~weaksig.core.estimate_sigma`.
    sigma_lam0 : str
        Scaled-Lasso penalty rule passed to :func:`~weaksig.core.estimate_sigma`.
    design_thresholds : bool
        Scale the classification thresholds by each coefficient's OLS
        standard error instead of ``sigma_hat/sqrt(n)``.
    """

    n: int
    p: int
    sigma: float
    rho: float
    theta_star: tuple
    theta_varying_index: int = 3
    theta_grid: tuple = ()
    replications: int = 400
    tau: float = 0.2
    alpha: float = 0.05
    seed: int = 0
    name: str = ""
    methods: tuple = METHODS
    bootstrap_replications: int = 4000
    orthogonalize: bool = False
    fixed_lambda: float | None = None
    known_sigma: bool = False
    sigma_method: str = "scaled_lasso"
    sigma_lam0: str = "quantile"
    design_thresholds: bool = True

    def __post_init__(self):
        object.__setattr__(self, "theta_star", tuple(float(t) for t in self.theta_star))
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if len(self.theta_star) != self.p:
            raise WeakSigError(f"theta_star has length {len(self.theta_star)}, expected p={self.p}")
        if self.replications < 1:
            raise WeakSigError("replications must be at least 1")
        if not 0 <= self.rho < 1:
            raise WeakSigError(f"rho must lie in [0, 1), got {self.rho}")

    def with_theta(self, theta: float) -> "SimulationScenario":
        ts = list(self.theta_star)
        ts[self.theta_varying_index] = float(theta)
        return replace(self, theta_star=tuple(ts), theta_grid=())

    def to_dict(self) -> dict:
        return asdict(self)


def benchmark_template(p: int, theta: float) -> tuple:
    """Coefficients ``(1, 1, 0.5, theta, 0, ..., 0)`` of length ``p``."""
    base = [1.0, 1.0, 0.5, float(theta)] + [0.0] * (p - 4)
    return tuple(base[:p])


def benchmark_scenario(n: int, p: int, rho: float, theta: float = 0.3, **kw) -> SimulationScenario:
    kw.setdefault("sigma", 2.0)
    kw.setdefault("name", f"n{n}_p{p}_rho{rho:g}")
    return SimulationScenario(n=n, p=p, rho=rho, theta_star=benchmark_template(p, theta), theta_varying_index=3, **kw)


def generate_design(sc: SimulationScenario, replicate: int) -> tuple[np.ndarray, np.ndarray]:
    """Raw design and standard-normal noise for one replicate (independent of ``theta_star``)."""
    rng = generator(sc.seed, replicate, TAG_DATA)
    Z = rng.standard_normal((sc.n, sc.p))
    eps = rng.standard_normal(sc.n)
    if sc.orthogonalize:
        Q, _ = np.linalg.qr(Z)
        return Q * math.sqrt(sc.n), eps
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    scale = math.sqrt(1 - sc.rho**2)
    for j in range(1, sc.p):
        X[:, j] = sc.rho * X[:, j - 1] + scale * Z[:, j]
    return X, eps


def generate_dataset(sc: SimulationScenario, replicate: int) -> Dataset:
    """Standardized dataset ``y = X theta_star + sigma * eps`` for one replicate."""
    X, eps = generate_design(sc, replicate)
    y = X @ np.asarray(sc.theta_star) + sc.sigma * eps
    return standardize(X, y)


# ---------------------------------------------------------------------------
# Per-replicate evaluation
# ---------------------------------------------------------------------------


def _empty_record(methods) -> dict:
    rec = {"category": None, "dropped": False, "boot_dropped": 0}
    for m in methods:
        rec[m] = {"has": False, "covered": False, "width": 0.0, "null_sel": 0, "null_total": 0}
    return rec


def evaluate_replicate(sc: SimulationScenario, replicate: int) -> dict:
    """Fit, tune, classify and score every method on one dataset.

    Widths are reported on the raw coefficient scale.  A replicate whose
    design is singular is returned with ``dropped=True``.
    """
    rec = _empty_record(sc.methods)
    try:
        d = generate_dataset(sc, replicate)
        i = sc.theta_varying_index
        truth = np.asarray(sc.theta_star) * d.x_scale
        nulls = [j for j in range(sc.p) if sc.theta_star[j] == 0]
        sigma_hat = sc.sigma if sc.known_sigma else estimate_sigma(d, sc.sigma_method, lam0=sc.sigma_lam0)
        theta_ls = ols_fit(d)
        if sc.fixed_lambda is None:
            fit = fit_with_bic(d, sigma_hat, theta_ls=theta_ls)
        else:
            fit = alasso_fit(d, sc.fixed_lambda, sigma_hat, theta_ls=theta_ls)
        cfg = TheoryConfig(d.n, sigma_hat, fit.lam, sc.alpha, sc.tau)
        cls = classify_design(fit, cfg, d) if sc.design_thresholds else classify(fit, cfg)
        rec["category"] = cls.label(i)
        rec["lambda"] = fit.lam
        rec["sigma_hat"] = sigma_hat

        def score(method, report):
            if report is None:
                return
            rec[method]["has"] = True
            rec[method]["covered"] = bool(report.covers(truth[i]))
            rec[method]["width"] = 2 * report.half_width / d.x_scale[i]

        if "two_step" in sc.methods:
            reps = {r.index: r for r in build_intervals(fit, cls, cfg, d)}
            score("two_step", reps.get(i))
            rec["two_step"]["null_sel"] = sum(1 for j in nulls if j not in cls.noise_set)
            rec["two_step"]["null_total"] = len(nulls)
        if "asymptotic" in sc.methods:
            reps = asymptotic_intervals(fit, d, sc.alpha, [i])
            score("asymptotic", reps[0] if reps else None)
            rec["asymptotic"]["null_sel"] = sum(1 for j in nulls if fit.theta_al[j] != 0)
            rec["asymptotic"]["null_total"] = len(nulls)
        if "ols" in sc.methods:
            score("ols", least_square_intervals(fit, d, sc.alpha, [i])[0])
        if "bootstrap" in sc.methods:
            bcfg = BootstrapConfig(replications=sc.bootstrap_replications, seed=sc.seed)
            rep, dropped = bootstrap_interval(d, fit.lam, bcfg, sc.alpha, i, replicate=replicate)
            score("bootstrap", rep)
            rec["boot_dropped"] = dropped
    except (SingularDesignError, ConvergenceError):
        rec = _empty_record(sc.methods)
        rec["dropped"] = True
    return rec


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRow:
    scenario: str
    n: int
    p: int
    rho: float
    theta: float
    method: str
    replications: int
    n_intervals: int
    coverage: float
    mean_width: float
    mc_stderr: float
    fp_rate: float
    p_noise: float
    p_weak: float
    p_strong: float

    @property
    def category_probs(self) -> tuple:
        return (self.p_noise, self.p_weak, self.p_strong)


CSV_COLUMNS = tuple(AggregateRow.__dataclass_fields__)


@dataclass
class AggregateReport:
    """Aggregated Monte Carlo results with run metadata."""

    rows: list = field(default_factory=list)
    scenarios: list = field(default_factory=list)
    dropped: dict = field(default_factory=dict)
    bootstrap_dropped: dict = field(default_factory=dict)

    def extend(self, other: "AggregateReport") -> None:
        self.rows.extend(other.rows)
        self.scenarios.extend(other.scenarios)
        self.dropped.update(other.dropped)
        self.bootstrap_dropped.update(other.bootstrap_dropped)

    def get(self, method: str, theta: float | None = None, scenario: str | None = None) -> AggregateRow:
        for r in self.rows:
            if r.method == method and (theta is None or r.theta == theta) and (scenario is None or r.scenario == scenario):
                return r
        raise KeyError((method, theta, scenario))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])

    def manifest(self, seed: int, extra: dict | None = None) -> dict:
        out = {
            "software": "weaksig",
            "version": __version__,
            "seed": int(seed),
            "scenarios": self.scenarios,
            "dropped_replicates": self.dropped,
            "dropped_bootstrap_resamples": self.bootstrap_dropped,
        }
        if extra:
            out.update(extra)
        return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v) + 0.0)
    return v


def _aggregate(sc: SimulationScenario, theta: float, records: list) -> list:
    kept = [r for r in records if not r["dropped"]]
    m = len(kept)
    cats = [r["category"] for r in kept]
    probs = tuple(cats.count(c) / m if m else float("nan") for c in ("noise", "weak", "strong"))
    rows = []
    for method in sc.methods:
        has = [r[method] for r in kept if r[method]["has"]]
        k = len(has)
        cov = sum(h["covered"] for h in has) / k if k else float("nan")
        width = sum(h["width"] for h in has) / k if k else float("nan")
        se = math.sqrt(cov * (1 - cov) / k) if k else float("nan")
        tot = sum(r[method]["null_total"] for r in kept)
        fp = sum(r[method]["null_sel"] for r in kept) / tot if tot else float("nan")
        rows.append(
            AggregateRow(sc.name, sc.n, sc.p, sc.rho, float(theta), method, m, k, float(cov), float(width), float(se), float(fp), *probs)
        )
    return rows


def worker_count() -> int:
    """Worker cap from the ``WEAKSIG_THREADS`` environment variable (default 1)."""
    raw = os.environ.get("WEAKSIG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_many(sc: SimulationScenario, workers: int) -> list:
    reps = range(sc.replications)
    if workers <= 1 or sc.replications < 2:
        return [evaluate_replicate(sc, r) for r in reps]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(evaluate_replicate, [sc] * sc.replications, reps, chunksize=8))


def run_scenario(sc: SimulationScenario, workers: int | None = None) -> AggregateReport:
    """Run every replicate of ``sc`` (for each value in its ``theta_grid``) and aggregate.

    Raises
    ------
    WeakSigError
        When more than 10% of the replicates of any ``theta`` are dropped.
    """
    if workers is None:
        workers = worker_count()
    grid = sc.theta_grid or (sc.theta_star[sc.theta_varying_index],)
    report = AggregateReport(scenarios=[sc.to_dict()])
    for theta in grid:
        cell = sc.with_theta(theta)
        records = _run_many(cell, workers)
        drops = sum(r["dropped"] for r in records)
        key = f"{sc.name}|theta={theta!r}"
        report.dropped[key] = drops
        boot = sum(r["boot_dropped"] for r in records)
        if boot:
            report.bootstrap_dropped[key] = boot
        if drops > MAX_DROP_FRACTION * sc.replications:
            raise WeakSigError(f"{drops} of {sc.replications} replicates dropped for {key}")
        report.rows.extend(_aggregate(cell, theta, records))
    return report


def category_probability_sweep(sc: SimulationScenario, theta_grid) -> AggregateReport:
    """Empirical noise / weak / strong probabilities of the varying coefficient over ``theta_grid``."""
    cell = replace(sc, theta_grid=tuple(theta_grid), methods=("two_step",))
    return run_scenario(cell)


# ---------------------------------------------------------------------------
# Orthogonal oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    """Closed-form coverage curve with its Monte Carlo twin."""

    curve: CoverageCurve
    empirical_cr1: np.ndarray
    empirical_cr: np.ndarray
    selected_asym: np.ndarray
    selected_two_step: np.ndarray

    def max_error(self) -> tuple[float, float]:
        """Largest absolute gap for each method over grid points with at least one selected draw."""
        return (
            float(np.nanmax(np.abs(self.empirical_cr1 - self.curve.cr1))),
            float(np.nanmax(np.abs(self.empirical_cr - self.curve.cr))),
        )

    def undefined_points(self) -> tuple[int, int]:
        """Grid points where no draw was selected, so empirical coverage is undefined."""
        return int(np.sum(self.selected_asym == 0)), int(np.sum(self.selected_two_step == 0))


def orthogonal_oracle_run(
    cfg: TheoryConfig,
    theta_grid,
    draws: int = 1_000_000,
    seed: int = 0,
    se_mode: str = "true",
    sampling: str = "iid",
) -> OracleResult:
    """Simulate ``theta_ls ~ N(theta, sigma^2/n)`` and score both interval rules.

    Parameters
    ----------
    cfg : TheoryConfig
    theta_grid : array_like
    draws : int
        Normal draws per grid point (at least ``1e5``).
    seed : int
    se_mode : {"true", "plugin"}
        ``"true"`` gives the asymptotic interval the half-width
        ``z sigma_tilde(theta)/sqrt(n)`` at the true ``theta``, the quantity
        the closed-form coverage describes.  ``"plugin"`` evaluates
        ``sigma_tilde`` at ``theta_ls`` as a data analyst would.
    sampling : {"iid", "stratified"}
        ``"stratified"`` places one uniform draw in each of ``draws`` equal
        probability strata before the normal transform, which removes most
        of the Monte Carlo noise at the same cost.
    """
    if draws < 100_000:
        raise WeakSigError("orthogonal_oracle_run needs at least 1e5 draws")
    rng = generator(seed, 0, TAG_ORACLE)
    if sampling == "iid":
        Z = rng.standard_normal(draws)
    elif sampling == "stratified":
        from ._normal import norm_ppf

        u = (np.arange(draws) + rng.random(draws)) / draws
        Z = norm_ppf(u)
    else:
        raise WeakSigError(f"unknown sampling scheme {sampling!r}")
    thetas = np.asarray(theta_grid, dtype=float)
    s, z = cfg.s, cfg.z_alpha
    hw_b = z * s
    emp1, emp2, sel1, sel2 = [], [], [], []
    for th in thetas:
        est = th + s * Z
        a = np.abs(est)
        if se_mode == "true":
            hw_a = z * float(sigma_tilde(th, cfg)) / math.sqrt(cfg.n)
        elif se_mode == "plugin":
            hw_a = z * np.asarray(sigma_tilde(est, cfg)) / math.sqrt(cfg.n)
        else:
            raise WeakSigError(f"unknown se_mode {se_mode!r}")
        err = np.abs(est - th)
        cover_a = err < hw_a
        s0 = a > cfg.nu0
        s1 = a > cfg.nu1
        strong = a > cfg.nu2
        cover_two = np.where(strong, cover_a, err < hw_b)
        n0, n1 = int(s0.sum()), int(s1.sum())
        emp1.append((cover_a & s0).sum() / n0 if n0 else np.nan)
        emp2.append((cover_two & s1).sum() / n1 if n1 else np.nan)
        sel1.append(n0)
        sel2.append(n1)
    return OracleResult(coverage_curve(thetas, cfg), np.array(emp1), np.array(emp2), np.array(sel1), np.array(sel2))


def false_positive_rate(cfg: TheoryConfig, draws: int = 100_000, seed: int = 0) -> float:
    """Fraction of null draws ``theta_ls ~ N(0, sigma^2/n)`` that escape the noise set."""
    Z = generator(seed, 0, TAG_ORACLE).standard_normal(draws)
    return float(np.mean(np.abs(cfg.s * Z) > cfg.nu1))


# ---------------------------------------------------------------------------
# Synthetic surrogate for mutation-presence data
# ---------------------------------------------------------------------------


def make_mutation_surrogate(seed: int = 0, n: int = 702, p: int = 79, sigma: float = 0.8):
    """Binary mutation-presence predictors with a continuous response.

    Returns ``(X, y, names, theta)``.  Predictor prevalences are drawn from
    ``U(0.03, 0.4)``; five coefficients are large, five are small and the
    rest are zero.  Column names follow a codon-style ``P<k>`` pattern.
    """
    rng = generator(seed, 0, TAG_DATA)
    prev = rng.uniform(0.03, 0.4, size=p)
    X = (rng.random((n, p)) < prev).astype(float)
    for j in range(p):  # guarantee variation in every column
        if X[:, j].min() == X[:, j].max():
            X[rng.integers(n), j] = 1.0 - X[0, j]
    theta = np.zeros(p)
    order = rng.permutation(p)
    theta[order[:5]] = rng.uniform(0.6, 1.2, size=5) * rng.choice([-1, 1], size=5)
    theta[order[5:10]] = rng.uniform(0.1, 0.25, size=5) * rng.choice([-1, 1], size=5)
    y = 1.0 + X @ theta + sigma * rng.standard_normal(n)
    codons = sorted(rng.choice(np.arange(1, 100), size=p, replace=False))
    names = [f"P{int(c)}" for c in codons]
    return X, y, names, theta


def write_mutation_surrogate(path, seed: int = 0, **kw) -> Path:
    """Write :func:`make_mutation_surrogate` output as a CSV with response column ``y``; return the path."""
    X, y, names, _ = make_mutation_surrogate(seed, **kw)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + names)
        for yi, row in zip(y, X):
            w.writerow([repr(float(yi))] + [str(int(v)) for v in row])
    return Path(path)
