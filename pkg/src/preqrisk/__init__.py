"""Prequential verification of sequential risk forecasts (VaR, CVaR, mean)."""

from .calibration import (
    CalibrationTrace,
    lil_statistic,
    mean_calibration,
    pit_transform,
    running_frequency,
    windowed_frequency,
)
from .dependence import (
    DependenceResult,
    PairCounts,
    ci_endpoints,
    independence_test,
    log_likelihood,
    pair_counts,
    stationary_distribution,
    theta_hat,
    theta_prime,
)
from .predictors import (
    PredictionTrace,
    adaptive_predictor,
    nonsense_predictor,
    rolling_quantile_predictor,
    run_predictor,
    sensitivity,
)
from .scoring import compare, expectile_score, mean_score, quantile_score, ru_score
from .series import (
    PriceSeries,
    ReturnSeries,
    TailFit,
    empirical_quantile,
    load_prices,
    returns,
    tail_fit,
)
from .tailrisk import (
    RiskEstimate,
    cmvar,
    cvar_of,
    cvar_power_tail,
    cvar_truncated,
    expectile,
    psi,
    var_of,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationTrace",
    "DependenceResult",
    "PairCounts",
    "PredictionTrace",
    "PriceSeries",
    "ReturnSeries",
    "RiskEstimate",
    "TailFit",
    "adaptive_predictor",
    "ci_endpoints",
    "cmvar",
    "compare",
    "cvar_of",
    "cvar_power_tail",
    "cvar_truncated",
    "empirical_quantile",
    "expectile",
    "expectile_score",
    "independence_test",
    "lil_statistic",
    "load_prices",
    "log_likelihood",
    "mean_calibration",
    "mean_score",
    "nonsense_predictor",
    "pair_counts",
    "pit_transform",
    "psi",
    "quantile_score",
    "returns",
    "rolling_quantile_predictor",
    "ru_score",
    "run_predictor",
    "running_frequency",
    "sensitivity",
    "stationary_distribution",
    "tail_fit",
    "theta_hat",
    "theta_prime",
    "var_of",
    "windowed_frequency",
]
