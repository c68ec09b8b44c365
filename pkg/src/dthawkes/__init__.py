"""Discrete-time marked multivariate Hawkes processes with geometric
excitation kernels: linear-time likelihood and gradient engines, ridge MLE,
exact recursive simulation and simulation-based forecasting."""

__version__ = "0.1.0"

from .core import (
    BinnedSeries,
    MarkedParams,
    RawEvent,
    SeasonalProfile,
    UnmarkedParams,
    bin_events,
    estimate_seasonal_profile,
    geometric_cdf,
    geometric_pmf,
    hour_of_bin,
)
from .estimator import FitConfig, FitReport, cross_validate_lambda, fit
from .evaluator import (
    ForecastResult,
    InterarrivalHistogram,
    PredictiveScore,
    TriggeringReport,
    forecast,
    interarrival_check,
    predictive_loglik,
    triggering_report,
)
from .gradient import GradVector, check_gradient, grad_naive, grad_recursive
from .intensity import (
    IntensityDecomposition,
    RecursionState,
    advance_state,
    decompose,
    intensities_at_events,
    intensity_naive,
)
from .likelihood import (
    LogLikValue,
    loglik_event_form,
    loglik_naive,
    loglik_recursive,
    loglik_regularized,
    ridge_penalty,
)
from .simulator import SimConfig, estimate_alarm_prob, simulate_naive, simulate_recursive
from .unmarked import u_grad, u_loglik, u_simulate

__all__ = [
    "BinnedSeries",
    "MarkedParams",
    "RawEvent",
    "SeasonalProfile",
    "UnmarkedParams",
    "bin_events",
    "estimate_seasonal_profile",
    "geometric_cdf",
    "geometric_pmf",
    "hour_of_bin",
    "FitConfig",
    "FitReport",
    "cross_validate_lambda",
    "fit",
    "ForecastResult",
    "InterarrivalHistogram",
    "PredictiveScore",
    "TriggeringReport",
    "forecast",
    "interarrival_check",
    "predictive_loglik",
    "triggering_report",
    "GradVector",
    "check_gradient",
    "grad_naive",
    "grad_recursive",
    "IntensityDecomposition",
    "RecursionState",
    "advance_state",
    "decompose",
    "intensities_at_events",
    "intensity_naive",
    "LogLikValue",
    "loglik_event_form",
    "loglik_naive",
    "loglik_recursive",
    "loglik_regularized",
    "ridge_penalty",
    "SimConfig",
    "estimate_alarm_prob",
    "simulate_naive",
    "simulate_recursive",
    "u_grad",
    "u_loglik",
    "u_simulate",
]
