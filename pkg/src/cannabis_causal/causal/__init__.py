"""Matching and weighting estimators, balance diagnostics and Monte-Carlo summaries."""

from .balance import ASMD_THRESHOLD, BalanceReport, asmd, asmd_columns
from .effects import ate_matched, naive_difference
from .estimators import IPTWEstimator, NaiveDifference, NearestNeighborMatching, PropensityScoreMatching
from .matching import MatchResult, cosine_distance, cosine_distance_matrix, nnm_match, psm_match
from .propensity import MODEL_KINDS, fit_propensity, make_propensity_model
from .simulation import (
    NAIVE,
    METHODS,
    AteSummary,
    EstimationSettings,
    SimulationResult,
    StudyData,
    StudyResult,
    prepare_study,
    run_simulation,
    run_study,
    sensitivity_grid,
    summarize_ci,
)
from .weighting import DEFAULT_TRIM, ate_iptw, iptw_weights, trim_mask

__all__ = [
    "ASMD_THRESHOLD", "AteSummary", "BalanceReport", "DEFAULT_TRIM", "EstimationSettings",
    "IPTWEstimator", "METHODS", "MODEL_KINDS", "MatchResult", "NaiveDifference",
    "NearestNeighborMatching", "PropensityScoreMatching", "SimulationResult", "StudyData",
    "StudyResult", "asmd", "asmd_columns", "ate_iptw", "ate_matched", "cosine_distance",
    "cosine_distance_matrix", "fit_propensity", "iptw_weights", "make_propensity_model",
    "naive_difference", "nnm_match", "prepare_study", "psm_match", "run_simulation", "run_study",
    "sensitivity_grid", "summarize_ci", "trim_mask",
]
