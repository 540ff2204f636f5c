"""Discrepancy-based UCB policies for non-stationary rested bandits."""

from .core import (
    ArmHistory,
    BanditError,
    ConfigError,
    ContractViolation,
    EmptyHistoryError,
    NoSupportError,
    NumericError,
    RegretLedger,
    WeightVector,
    path_dependent_reg,
    weighted_mean,
)
from .config import ExperimentConfig, load_config, parse_config
from .engine import EnvSpec, run_experiment, run_trial, run_trials
from .export import export_csv
from .policies import EXP3, UCB1, DiscUCB, PolicySpec, WeightedUCB
from .weights import SchemeKind, WeightScheme, weights_for

__version__ = "0.1.0"

__all__ = [
    "ArmHistory",
    "BanditError",
    "ConfigError",
    "ContractViolation",
    "DiscUCB",
    "EmptyHistoryError",
    "EnvSpec",
    "EXP3",
    "ExperimentConfig",
    "export_csv",
    "load_config",
    "NoSupportError",
    "NumericError",
    "parse_config",
    "path_dependent_reg",
    "PolicySpec",
    "RegretLedger",
    "run_experiment",
    "run_trial",
    "run_trials",
    "SchemeKind",
    "UCB1",
    "weighted_mean",
    "WeightedUCB",
    "weights_for",
    "WeightScheme",
    "WeightVector",
]
