"""Instrumental-variable estimation of average causal effects under
effect heterogeneity: estimators, a simulation model with binary
confounders, and a Monte Carlo harness."""

from .dgp import (
    AssumptionReport,
    ErrorDist,
    GeneratedData,
    ScenarioConfig,
    Triple,
    analytic_ace,
    builtin_scenario,
    classify,
    draw_errors,
    generate,
    multiplicative_additive_mod,
)
from .errors import (
    InputError,
    IrrelevantInstrumentError,
    NoshLabError,
    NumericalError,
    SingularityError,
    SpecError,
    UndefinedEstimandError,
    UnsupportedConfigError,
)
from .ivest import (
    IvEstimate,
    IvKind,
    IvSpec,
    binary_decomposition_estimand,
    discrete_z_decomposition,
    tsls_fit,
    wald_from_summary,
    wald_ratio,
)
from .mc import McConfig, McSummary, derive_rep_seed, run_cell, run_grid
from .numkit import Dataset, LinearFit, fit_least_squares, sample_cov, sample_median, sandwich_cov

__version__ = "0.1.0"
