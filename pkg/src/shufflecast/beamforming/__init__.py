"""Beamforming: logistic quality model, MM optimizer and baselines."""

from .baselines import RankDeficientError, mrt, sum_rate, wmmse, zf
from .logistic import (AnchorSingularityError, LogisticFitError, LogisticParams, SurrogateCoeffs,
                       fit_logistic, logistic_score, logistic_score_db, surrogate_coeffs, zeta)
from .mm import (CompResult, IndefiniteSystemError, SolveOptions, SolveReport, anchor_coeffs,
                 objective, optimize_correlated, optimize_uncorrelated, phase_normalize, update_r,
                 update_v, wrap_phase)

__all__ = [
    "AnchorSingularityError", "CompResult", "IndefiniteSystemError", "LogisticFitError",
    "LogisticParams", "RankDeficientError", "SolveOptions", "SolveReport", "SurrogateCoeffs",
    "anchor_coeffs", "fit_logistic", "logistic_score", "logistic_score_db", "mrt", "objective",
    "optimize_correlated", "optimize_uncorrelated", "phase_normalize", "sum_rate",
    "surrogate_coeffs", "update_r", "update_v", "wmmse", "wrap_phase", "zeta", "zf",
]
