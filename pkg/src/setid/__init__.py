"""Set identification of frictionless linear models with wedge sign restrictions."""

from __future__ import annotations

from .config import parse_expression, parse_model_config, parse_model_text, parse_run_config, serialize_model
from .errors import SetIdError
from .estimators import IdentifiedSetEstimator, WedgeExtractor
from .io import load_survey, load_timeseries, write_timeseries
from .kalman import kalman_filter, run_filter, steady_state_gain
from .mcmc import MCMCConfig, extract_set, run_mcmc, sharp_endpoint
from .model import ModelSpec, ParamVector, assemble_state_space, check_local_identification, solve_re
from .moments import InstrumentSet, MomentSystem, SurveySeries, build_macro_moments, build_survey_moments
from .qp import solve_weights, solve_weights_analytic, wedge_series, wedges_from_set
from .waldtest import bootstrap_critical_value, wald_statistic
from .wedges import mu_to_lambda, sign_fixture, wedge_law

__version__ = "0.1.0"

__all__ = [
    "IdentifiedSetEstimator", "InstrumentSet", "MCMCConfig", "ModelSpec", "MomentSystem", "ParamVector",
    "SetIdError", "SurveySeries", "WedgeExtractor", "assemble_state_space", "bootstrap_critical_value",
    "build_macro_moments", "build_survey_moments", "check_local_identification", "extract_set",
    "kalman_filter", "load_survey", "load_timeseries", "mu_to_lambda", "parse_expression",
    "parse_model_config", "parse_model_text", "parse_run_config", "run_filter", "run_mcmc",
    "serialize_model", "sharp_endpoint", "sign_fixture", "solve_re", "solve_weights",
    "solve_weights_analytic", "steady_state_gain", "wald_statistic", "wedge_law", "wedge_series",
    "wedges_from_set", "write_timeseries",
]
