"""Bayesian models for long-term annual maximum temperature series.

Two competing descriptions are provided: a coupled continuous-time random walk
(:class:`CTRWRegressor`) and a linear plus monotone spectral trend regression
(:class:`IsotonicBSARRegressor`). Both are compared with DIC, PSIS-LOO, RMSE
and MAE in :mod:`tmaxbayes.comparison`.
"""

from .bsar import BsarPriors, BsarState, IsotonicBSARRegressor, build_basis, eval_f
from .comparison import ComparisonReport, ModelEntry, compare, dic, mae, psis_loo, rmse
from .ctrw import CTRWRegressor, CtrwParams, CtrwPriors, marginal_increment_logpdf
from .exceptions import (
    DegenerateError,
    IngestError,
    InitError,
    InputError,
    InsufficientDrawsError,
    NumericalError,
    ParseError,
    QuadratureError,
    ShapeError,
    StuckChainError,
    TmaxError,
    ValidationError,
)
from .mcmc import McmcConfig, PosteriorDraws, TargetDensity, diagnose, ess, run_chains, split_rhat, summarize
from .series import (
    NormalizedSeries,
    SeasonalTable,
    correlation_matrix,
    increments,
    load_csv,
    make_table,
    normalize,
    pearson,
)

__all__ = [
    "BsarPriors",
    "BsarState",
    "CTRWRegressor",
    "ComparisonReport",
    "CtrwParams",
    "CtrwPriors",
    "DegenerateError",
    "IngestError",
    "InitError",
    "InputError",
    "InsufficientDrawsError",
    "IsotonicBSARRegressor",
    "McmcConfig",
    "ModelEntry",
    "NormalizedSeries",
    "NumericalError",
    "ParseError",
    "PosteriorDraws",
    "QuadratureError",
    "SeasonalTable",
    "ShapeError",
    "StuckChainError",
    "TargetDensity",
    "TmaxError",
    "ValidationError",
    "build_basis",
    "compare",
    "correlation_matrix",
    "diagnose",
    "dic",
    "ess",
    "eval_f",
    "increments",
    "load_csv",
    "mae",
    "make_table",
    "marginal_increment_logpdf",
    "normalize",
    "pearson",
    "psis_loo",
    "rmse",
    "run_chains",
    "split_rhat",
    "summarize",
]
