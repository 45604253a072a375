"""Bayesian ground-contact estimation for wheeled bipeds.

A two-state recursive Bayes filter: torque likelihoods come from kernel
density estimates fitted on contact and no-contact data, transitions from
the power spectrum of recent vertical acceleration.
"""

from .bayes import (Belief, ContactFilter, FilterRun, TransitionMatrix, bayes_step, measurement_only, predict,
                    run_filter, sigmoid, transition_model, update)
from .config import EstimatorConfig, SigmoidParams
from .density import KdeModel, TorqueSample, fit_kde, likelihood, log_likelihood
from .errors import (ConfigError, ContactBayesError, DegenerateSpectrumError, FitError, InsufficientDataError,
                     MissingLabelsError, SignalValidityError, TraceFormatError)
from .evaluation import detect_events, latency_stats, match_events, noise_sweep, pointwise_metrics
from .spectral import AccelWindow, PowerSpectrum, median_frequency, power_spectrum, push_sample
from .synth import LabeledTrace, ScenarioConfig, generate_fit_dataset, generate_trace

__version__ = "0.1.0"

__all__ = [
    "AccelWindow", "Belief", "ConfigError", "ContactBayesError", "ContactFilter", "DegenerateSpectrumError",
    "EstimatorConfig", "FilterRun", "FitError", "InsufficientDataError", "KdeModel", "LabeledTrace",
    "MissingLabelsError", "PowerSpectrum", "ScenarioConfig", "SigmoidParams", "SignalValidityError",
    "TorqueSample", "TraceFormatError", "TransitionMatrix", "bayes_step", "detect_events", "fit_kde",
    "generate_fit_dataset", "generate_trace", "latency_stats", "likelihood", "log_likelihood", "match_events",
    "measurement_only", "median_frequency", "noise_sweep", "pointwise_metrics", "power_spectrum", "predict",
    "push_sample", "run_filter", "sigmoid", "transition_model", "update",
]
