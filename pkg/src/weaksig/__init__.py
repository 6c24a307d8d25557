"""Weak-signal identification and two-step inference for the adaptive Lasso."""

__version__ = "0.1.0"

from .alasso import TuningGrid, alasso_fit, alasso_soft_threshold, bic_select, fit_with_bic
from .baselines import BootstrapConfig, bootstrap_interval, ols_interval
from .core import Dataset, FitResult, estimate_sigma, ols_fit, standardize
from .coverage import (
    BoundaryPoints,
    CoverageCurve,
    boundary_points,
    cr1,
    cr_a,
    cr_b,
    cr_two_step,
    p_s,
    sigma_tilde,
    theorem_bounds,
)
from .inference import IntervalReport, alasso_bias, alasso_covariance, build_intervals
from .signal import (
    SignalClassification,
    TheoryConfig,
    classify,
    detection_prob,
    estimated_detection_prob,
    expected_detection_prob,
    nu_for_gamma,
)

__all__ = [
    "BootstrapConfig",
    "BoundaryPoints",
    "CoverageCurve",
    "Dataset",
    "FitResult",
    "IntervalReport",
    "SignalClassification",
    "TheoryConfig",
    "TuningGrid",
    "alasso_bias",
    "alasso_covariance",
    "alasso_fit",
    "alasso_soft_threshold",
    "bic_select",
    "boundary_points",
    "bootstrap_interval",
    "build_intervals",
    "classify",
    "cr1",
    "cr_a",
    "cr_b",
    "cr_two_step",
    "detection_prob",
    "estimate_sigma",
    "estimated_detection_prob",
    "expected_detection_prob",
    "fit_with_bic",
    "nu_for_gamma",
    "ols_fit",
    "ols_interval",
    "p_s",
    "sigma_tilde",
    "standardize",
    "theorem_bounds",
]
