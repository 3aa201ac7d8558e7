"""Empirical-likelihood inference for multiple samples linked by a
density ratio, with grouped-bootstrap confidence intervals.

Hot likelihood kernels are numba-jitted by default; set
``DRMBOOT_BACKEND=numpy`` before import to run on the pure-numpy path.
"""

from ._backend import BACKEND
from .asymptotics import (
    build_S,
    cdf_covariance,
    cdf_covariance_grid,
    estimate_W,
    param_covariance,
)
from .basis import BasisSpec, basis_matrix, eval_basis
from .bootstrap import (
    BootstrapSummary,
    FunctionalSpec,
    bootstrap_run,
    evaluate_functionals,
    percentile_ci,
    resample,
)
from .errors import (
    BasisDomainError,
    BootstrapError,
    ConfigError,
    DrmError,
    EvaluationError,
    FitError,
)
from .estimators import (
    FittedProbabilities,
    StepCdf,
    cdf_estimate,
    dominance_index,
    fitted_probabilities,
    quantile,
)
from .likelihood import (
    MultiSampleData,
    dual_logel,
    dual_logel_gradient,
    dual_logel_hessian,
    group_weight,
    log_mixture_weight,
    mixture_weights,
)
from .optimizer import DrmFit, FitOptions, fit_mele
from .simulation import (
    CoverageReport,
    Family,
    ScenarioSpec,
    aggregate_coverage,
    cdf_targets,
    coverage_experiment,
    gamma_scenario,
    generate,
    normal_scenario,
    quantile_targets,
    scenario_by_name,
    theta_targets,
    true_theta,
    true_value,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BasisSpec",
    "eval_basis",
    "basis_matrix",
    "MultiSampleData",
    "dual_logel",
    "dual_logel_gradient",
    "dual_logel_hessian",
    "log_mixture_weight",
    "group_weight",
    "mixture_weights",
    "FitOptions",
    "DrmFit",
    "fit_mele",
    "StepCdf",
    "FittedProbabilities",
    "fitted_probabilities",
    "cdf_estimate",
    "quantile",
    "dominance_index",
    "estimate_W",
    "build_S",
    "param_covariance",
    "cdf_covariance",
    "cdf_covariance_grid",
    "FunctionalSpec",
    "BootstrapSummary",
    "resample",
    "evaluate_functionals",
    "bootstrap_run",
    "percentile_ci",
    "Family",
    "ScenarioSpec",
    "gamma_scenario",
    "normal_scenario",
    "scenario_by_name",
    "true_theta",
    "true_value",
    "generate",
    "theta_targets",
    "quantile_targets",
    "cdf_targets",
    "coverage_experiment",
    "aggregate_coverage",
    "CoverageReport",
    "DrmError",
    "BasisDomainError",
    "EvaluationError",
    "FitError",
    "BootstrapError",
    "ConfigError",
]
