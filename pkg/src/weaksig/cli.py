"""Command-line entry points: ``weaksig analyze | theory | simulate``."""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import harness as H
from .alasso import fit_with_bic
from .core import estimate_sigma, ols_fit
from .coverage import (
    boundary_points,
    cr1,
    cr_two_step,
    default_grid,
    theorem_bound_curve,
)
from .errors import ConfigError, NoRootError, WeakSigError
from .inference import build_intervals, classify_design
from .io import ingest_csv, write_json, write_rows
from .signal import TheoryConfig, detection_prob, expected_detection_prob

COMMANDS = ("analyze", "theory", "simulate")
PRESETS = ("paper-table3", "paper-table3-large", "fig7", "oracle", "smoke")


@dataclass
class RunConfig:
    """Every option of every subcommand; JSON config files use these keys.

    ``overrides`` holds extra :class:`~weaksig.harness.SimulationScenario`
    fields applied to each scenario of a simulation preset.
    """

    command: str
    out: str = "."
    input: str | None = None
    alpha: float = 0.05
    tau: float | None = None
    seed: int = 0
    response: str = "y"
    allow_wide: bool = False
    center: bool = False
    sigma_method: str = "scaled_lasso"
    sigma_lam0: str = "quantile"
    n: int | None = None
    sigma: float | None = None
    lam: float | None = None
    grid_size: int = 2000
    preset: str = "smoke"
    reps: int | None = None
    bootstrap: bool = False
    bootstrap_reps: int = 4000
    draws: int = 1_000_000
    overrides: dict = field(default_factory=dict)

    def default_tau(self) -> float:
        if self.tau is not None:
            return self.tau
        return 0.2 if self.command == "simulate" else 0.05

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not 0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if not 0 < self.default_tau() < 0.5:
            raise ConfigError(f"tau must lie in (0, 0.5), got {self.default_tau()}")
        if self.command == "analyze" and not self.input:
            raise ConfigError("analyze needs --input")
        if self.command == "theory" and None in (self.n, self.sigma, self.lam):
            raise ConfigError("theory needs --n, --sigma and --lambda")
        if self.command == "simulate" and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["tau"] = self.default_tau()
        return out


_FIELDS = {f.name for f in fields(RunConfig)}


def _parser() -> argparse.ArgumentParser:
    # Defaults are suppressed so that only flags given on the command line
    # override values from --config.
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON file with any of the options below")
    common.add_argument("--out", default=S, help="output directory")
    common.add_argument("--alpha", type=float, default=S)
    common.add_argument("--tau", type=float, default=S)
    common.add_argument("--seed", type=int, default=S)

    p = argparse.ArgumentParser(prog="weaksig", description="Weak-signal identification and two-step inference.")
    p.add_argument("--version", action="version", version=f"weaksig {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="classify coefficients and build intervals for a CSV")
    a.add_argument("--input", default=S)
    a.add_argument("--response", default=S)
    a.add_argument("--allow-wide", dest="allow_wide", action="store_const", const=True, default=S)
    a.add_argument("--center", action="store_const", const=True, default=S)
    a.add_argument("--sigma-method", dest="sigma_method", choices=("scaled_lasso", "ols"), default=S)
    a.add_argument("--sigma-lam0", dest="sigma_lam0", choices=("quantile", "universal"), default=S)

    t = sub.add_parser("theory", parents=[common], help="evaluate closed-form coverage curves")
    t.add_argument("--n", type=int, default=S)
    t.add_argument("--sigma", type=float, default=S)
    t.add_argument("--lambda", dest="lam", type=float, default=S)
    t.add_argument("--grid-size", dest="grid_size", type=int, default=S)

    s = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo preset")
    s.add_argument("--preset", choices=PRESETS, default=S)
    s.add_argument("--reps", type=int, default=S)
    s.add_argument("--bootstrap", action="store_const", const=True, default=S)
    s.add_argument("--bootstrap-reps", dest="bootstrap_reps", type=int, default=S)
    s.add_argument("--draws", type=int, default=S)
    s.add_argument("--n", type=int, default=S, help="oracle preset: sample size")
    s.add_argument("--sigma", type=float, default=S, help="oracle preset: noise sd")
    s.add_argument("--lambda", dest="lam", type=float, default=S, help="oracle preset: tuning parameter")
    return p


def load_config(argv=None) -> RunConfig:
    """Parse ``argv``, merging ``--config`` JSON underneath explicit flags."""
    ns = vars(_parser().parse_args(argv))
    command = ns.pop("command")
    cfg_path = ns.pop("config", None)
    merged: dict = {}
    if cfg_path:
        try:
            data = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {cfg_path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {cfg_path} must hold a JSON object")
        data = {("lam" if k == "lambda" else k.replace("-", "_")): v for k, v in data.items()}
        data.pop("command", None)
        unknown = sorted(set(data) - _FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged.update(data)
    merged.update(ns)
    rc = RunConfig(command=command, **merged)
    rc.validate()
    return rc


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def analyze(rc: RunConfig) -> dict:
    """Fit, tune, classify and build intervals for ``rc.input``; write the report files."""
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    tau = rc.default_tau()
    d, names = ingest_csv(rc.input, rc.response, rc.allow_wide, rc.center)
    report: dict = {"config": rc.to_dict(), "version": __version__, "n": d.n, "p": d.p, "warnings": []}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sigma_hat = estimate_sigma(d, rc.sigma_method, lam0=rc.sigma_lam0)
        if d.n <= d.p:
            report.update(sigma_hat=sigma_hat, coefficients=[], note="n <= p: noise-scale estimate only")
            report["warnings"] += [str(w.message) for w in caught]
            write_json(out / "report.json", report)
            write_rows(out / "intervals.csv", INTERVAL_COLUMNS, [])
            return report
        fit = fit_with_bic(d, sigma_hat, theta_ls=ols_fit(d))
    report["warnings"] += [str(w.message) for w in caught]
    cfg = TheoryConfig(d.n, sigma_hat, fit.lam, rc.alpha, tau)
    cfg.validate(lambda_criterion=False)
    if not cfg.lambda_criterion_holds():
        report["warnings"] += cfg.violations(lambda_criterion=True)
    cls = classify_design(fit, cfg, d)
    ivs = {r.index: r for r in build_intervals(fit, cls, cfg, d)}
    coefs, rows = [], []
    for j, name in enumerate(names):
        iv = ivs.get(j)
        entry = {
            "index": j,
            "name": name,
            "class": cls.label(j),
            "theta_ls": float(fit.theta_ls[j]),
            "theta_alasso": float(fit.theta_al[j]),
            "nu1": cls.nu1_by_index[j],
            "nu2": cls.nu2_by_index[j],
            "rule": iv.rule if iv else None,
            "interval": [iv.lower, iv.upper] if iv else None,
            "interval_original_units": [iv.lower / d.x_scale[j], iv.upper / d.x_scale[j]] if iv else None,
            "bias": iv.bias if iv else None,
            "se": iv.se if iv else None,
        }
        coefs.append(entry)
        if iv:
            rows.append(
                {
                    "index": j,
                    "name": name,
                    "class": entry["class"],
                    "rule": iv.rule,
                    "center": iv.center,
                    "lower": iv.lower,
                    "upper": iv.upper,
                    "bias": iv.bias,
                    "se": iv.se,
                    "lower_original": iv.lower / d.x_scale[j],
                    "upper_original": iv.upper / d.x_scale[j],
                }
            )
    report.update(
        {
            "lambda": fit.lam,
            "sigma_hat": sigma_hat,
            "nu1": cls.nu1,
            "nu2": cls.nu2,
            "gamma1": cls.gamma1,
            "gamma2": cls.gamma2,
            "tau0": cfg.tau0,
            "noise_set": sorted(names[i] for i in cls.noise_set),
            "weak_set": sorted(names[i] for i in cls.weak_set),
            "strong_set": sorted(names[i] for i in cls.strong_set),
            "coefficients": coefs,
        }
    )
    write_json(out / "report.json", report)
    write_rows(out / "intervals.csv", INTERVAL_COLUMNS, rows)
    return report


INTERVAL_COLUMNS = (
    "index",
    "name",
    "class",
    "rule",
    "center",
    "lower",
    "upper",
    "bias",
    "se",
    "lower_original",
    "upper_original",
)


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------

CURVE_COLUMNS = ("theta", "p_d", "e_pd_hat", "cr1", "cr", "delta", "bound", "region_label")


def theory(rc: RunConfig) -> dict:
    """Write ``curves.csv``, ``boundaries.json`` and ``manifest.json`` for one configuration."""
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = TheoryConfig(int(rc.n), float(rc.sigma), float(rc.lam), rc.alpha, rc.default_tau())
    warn = cfg.violations(lambda_criterion=True)
    thetas = default_grid(cfg, rc.grid_size)
    a = np.asarray(cr1(thetas, cfg), dtype=float)
    b = np.asarray(cr_two_step(thetas, cfg), dtype=float)
    bounds = np.full(thetas.shape, np.nan)
    labels = [""] * thetas.size
    bp = None
    try:
        bp = boundary_points(cfg, strict=not warn)
    except (NoRootError, ConfigError) as exc:
        warn.append(f"boundary points unavailable: {exc}")
    if bp is not None and not warn:
        bounds, labels = theorem_bound_curve(thetas, cfg, bp)
    pd = np.asarray(detection_prob(thetas, cfg))
    epd = np.asarray(expected_detection_prob(thetas, cfg))
    rows = [
        (thetas[k], pd[k], epd[k], a[k], b[k], b[k] - a[k], None if math.isnan(bounds[k]) else bounds[k], labels[k])
        for k in range(thetas.size)
    ]
    write_rows(out / "curves.csv", CURVE_COLUMNS, rows)
    bdict = {k: None for k in ("c1", "c2", "c3", "c4")}
    case = None
    if bp is not None:
        bdict = {k: getattr(bp, k) for k in ("c1", "c2", "c3", "c4")}
        case = bp.case()
    boundaries = {
        **bdict,
        **{f"nu{k}": getattr(cfg, f"nu{k}") for k in range(5)},
        "tau0": cfg.tau0,
        "regime": cfg.regime(),
        "case": case,
        "ordered": bool(bp.ordered()) if bp is not None else None,
        "warnings": warn,
        "config": rc.to_dict(),
    }
    write_json(out / "boundaries.json", boundaries)
    write_json(
        out / "manifest.json",
        {"software": "weaksig", "version": __version__, "command": "theory", "config": rc.to_dict(), "tau0": cfg.tau0, "warnings": warn},
    )
    return boundaries


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

TABLE3_RHOS = (0.0, 0.2, 0.5)
TABLE3_THETAS = (0.3, 0.75)
FIG7_GRID = tuple(round(0.05 * k, 2) for k in range(21))


def _scenarios(rc: RunConfig) -> list:
    kw = dict(seed=rc.seed, tau=rc.default_tau(), alpha=rc.alpha)
    if rc.reps is not None:
        kw["replications"] = rc.reps
    methods = H.METHODS + (("bootstrap",) if rc.bootstrap else ())
    kw["methods"] = methods
    kw["bootstrap_replications"] = rc.bootstrap_reps
    kw.update(rc.overrides)
    if rc.preset in ("paper-table3", "paper-table3-large"):
        n, p = (100, 20) if rc.preset == "paper-table3" else (400, 50)
        return [H.benchmark_scenario(n, p, rho, theta_grid=TABLE3_THETAS, **kw) for rho in TABLE3_RHOS]
    if rc.preset == "fig7":
        kw["methods"] = ("two_step",)
        return [H.benchmark_scenario(100, 20, 0.2, theta_grid=FIG7_GRID, **kw)]
    kw.setdefault("replications", 10)
    return [H.benchmark_scenario(100, 20, 0.2, 0.3, **kw)]


def _table3_rows(report: H.AggregateReport) -> list:
    rows = []
    for r in report.rows:
        rows.append(
            {
                "rho": r.rho,
                "theta": r.theta,
                "method": r.method,
                "coverage_pct": 100 * r.coverage,
                "mean_width": r.mean_width,
                "mc_stderr_pct": 100 * r.mc_stderr,
                "n_intervals": r.n_intervals,
            }
        )
    return rows


def simulate(rc: RunConfig) -> dict:
    """Run a preset and write ``aggregate.csv`` (or ``oracle.csv``) plus ``manifest.json``."""
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    base = {"software": "weaksig", "version": __version__, "command": "simulate", "config": rc.to_dict(), "workers": H.worker_count()}
    if rc.preset == "oracle":
        if None in (rc.n, rc.sigma, rc.lam):
            raise ConfigError("the oracle preset needs --n, --sigma and --lambda")
        cfg = TheoryConfig(int(rc.n), float(rc.sigma), float(rc.lam), rc.alpha, rc.default_tau())
        grid = np.linspace(0.0, cfg.sqrt_lam + 6 * cfg.s, 50)
        res = H.orthogonal_oracle_run(cfg, grid, draws=rc.draws, seed=rc.seed)
        rows = [
            (grid[k], res.curve.cr1[k], res.empirical_cr1[k], res.curve.cr[k], res.empirical_cr[k])
            for k in range(grid.size)
        ]
        write_rows(out / "oracle.csv", ("theta", "cr1", "empirical_cr1", "cr", "empirical_cr"), rows)
        e1, e2 = res.max_error()
        manifest = {**base, "seed": rc.seed, "max_error_cr1": e1, "max_error_cr": e2}
        write_json(out / "manifest.json", manifest)
        return manifest
    report = H.AggregateReport()
    for sc in _scenarios(rc):
        report.extend(H.run_scenario(sc))
    report.write_csv(out / "aggregate.csv")
    if rc.preset.startswith("paper-table3"):
        write_rows(
            out / "table3.csv",
            ("rho", "theta", "method", "coverage_pct", "mean_width", "mc_stderr_pct", "n_intervals"),
            _table3_rows(report),
        )
    manifest = report.manifest(rc.seed, base)
    write_json(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_HANDLERS = {"analyze": analyze, "theory": theory, "simulate": simulate}


def _write_error(out, exc: Exception) -> None:
    try:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_json(Path(out) / "error.json", {"error": type(exc).__name__, "message": str(exc)})
    except OSError:
        pass


def main(argv=None) -> int:
    """Console entry point; returns the process exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        rc = load_config(argv)
    except WeakSigError as exc:
        out = "."
        if "--out" in argv and argv.index("--out") + 1 < len(argv):
            out = argv[argv.index("--out") + 1]
        _write_error(out, exc)
        print(f"weaksig: error: {exc}", file=sys.stderr)
        return 2
    try:
        _HANDLERS[rc.command](rc)
    except WeakSigError as exc:
        _write_error(rc.out, exc)
        print(f"weaksig: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
