"""Empirical likelihood inference for parameters defined by estimating
equations: the original log-likelihood ratio and its domain, the
Bartlett-corrected ratio, first- and second-order extended ratios defined
on the whole parameter space, chi-square calibrated confidence regions,
and a reproducible Monte Carlo coverage harness."""

from .eel import (
    DEFAULT_CAP,
    ElEvaluation,
    ExpansionFactor,
    bartlett_constant,
    bel_loglik,
    eel_loglik,
    evaluate,
    forward_map,
    inverse_map,
)
from .estimator import MeleResult, mele
from .exceptions import (
    BelClampWarning,
    DataFormatError,
    DomainViolationError,
    ElError,
    InvalidArgumentError,
    InvalidDimensionError,
    NonConvergenceError,
    RankDeficiencyError,
    SurjectivityError,
    UnsupportedConfigurationError,
)
from .inference import (
    GridTable,
    RegionSpec,
    chisq_cdf,
    chisq_quantile,
    contour_grid,
    make_region_spec,
    region_contains,
)
from .model import (
    EstimatingModel,
    Sample,
    builtin_linear_regression,
    builtin_mean,
    builtin_mean_variance,
    get_model,
    load_sample,
    model_names,
    register_model,
)
from .oel import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    DomainStatus,
    DualSolution,
    OelEvaluator,
    in_domain,
    oel_gradient,
    oel_loglik,
    solve_dual,
)
from .simulation import (
    CoverageCell,
    CoverageReport,
    StudyConfig,
    format_coverage_table,
    report_delimited_lines,
    run_coverage,
    simulate_model1,
    simulate_model2,
)

__version__ = "0.1.0"

__all__ = [
    "BelClampWarning",
    "CoverageCell",
    "CoverageReport",
    "DEFAULT_CAP",
    "DEFAULT_MAX_ITER",
    "DEFAULT_TOL",
    "DataFormatError",
    "DomainStatus",
    "DomainViolationError",
    "DualSolution",
    "ElError",
    "ElEvaluation",
    "EstimatingModel",
    "ExpansionFactor",
    "GridTable",
    "InvalidArgumentError",
    "InvalidDimensionError",
    "MeleResult",
    "NonConvergenceError",
    "OelEvaluator",
    "RankDeficiencyError",
    "RegionSpec",
    "Sample",
    "StudyConfig",
    "SurjectivityError",
    "UnsupportedConfigurationError",
    "bartlett_constant",
    "bel_loglik",
    "builtin_linear_regression",
    "builtin_mean",
    "builtin_mean_variance",
    "chisq_cdf",
    "chisq_quantile",
    "contour_grid",
    "eel_loglik",
    "evaluate",
    "format_coverage_table",
    "forward_map",
    "get_model",
    "in_domain",
    "inverse_map",
    "load_sample",
    "make_region_spec",
    "mele",
    "model_names",
    "oel_gradient",
    "oel_loglik",
    "region_contains",
    "register_model",
    "report_delimited_lines",
    "run_coverage",
    "simulate_model1",
    "simulate_model2",
    "solve_dual",
]
