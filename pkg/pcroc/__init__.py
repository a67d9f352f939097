"""ROC analysis for linear paired comparison models."""

from .config import FitConfig, MetricConfig, SimulationConfig, StoreConfig
from .data import CsvFormat, GameRecord, PairCounts, aggregate, check_connectivity, load_games
from .errors import (
    ConfigError,
    ConnectivityError,
    ConvergenceError,
    DegenerateClassError,
    GameLogError,
    PairedRocError,
    TaylorRadicandWarning,
)
from .fit import LOGISTIC, PROBIT, fit_mle, get_link, predict_probs
from .inference import (
    TrueModel,
    check_wl_ge_sw,
    limiting_c_stats,
    moments,
    se_c_sw_taylor,
    se_c_wl,
    true_c_stats,
)
from .metricsim import as_threshold_curve, convergence_experiment, roc_distance, simulate_se_decay
from .roc import RocCurve, analyze, auc, rank_pairs, sw_curve, wl_curve

__all__ = [
    "FitConfig",
    "MetricConfig",
    "SimulationConfig",
    "StoreConfig",
    "CsvFormat",
    "GameRecord",
    "PairCounts",
    "aggregate",
    "check_connectivity",
    "load_games",
    "ConfigError",
    "ConnectivityError",
    "ConvergenceError",
    "DegenerateClassError",
    "GameLogError",
    "PairedRocError",
    "TaylorRadicandWarning",
    "LOGISTIC",
    "PROBIT",
    "fit_mle",
    "get_link",
    "predict_probs",
    "TrueModel",
    "check_wl_ge_sw",
    "limiting_c_stats",
    "moments",
    "se_c_sw_taylor",
    "se_c_wl",
    "true_c_stats",
    "as_threshold_curve",
    "roc_distance",
    "simulate_se_decay",
    "convergence_experiment",
    "RocCurve",
    "analyze",
    "auc",
    "rank_pairs",
    "sw_curve",
    "wl_curve",
]
