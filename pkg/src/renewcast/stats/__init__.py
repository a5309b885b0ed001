"""Statistical engine: moments, unit-root tests, mutual information, PCA, Friedman."""
from .descriptive import ConfidenceInterval, SummaryStats, confidence_interval, summary_stats
from .friedman import FriedmanResult, chi2_sf, friedman_test, regularized_upper_gamma
from .information import mutual_information, mutual_information_from_joint, mutual_information_matrix
from .pca import PcaModel, RankDeficientWarning, pca_fit, pca_project, pca_reconstruct
from .unitroot import (
    StationarityReport,
    adf_test,
    joint_verdict,
    kpss_test,
    mackinnon_pvalue,
    stationarity_report,
)

__all__ = [
    "ConfidenceInterval",
    "FriedmanResult",
    "PcaModel",
    "RankDeficientWarning",
    "StationarityReport",
    "SummaryStats",
    "adf_test",
    "chi2_sf",
    "confidence_interval",
    "friedman_test",
    "joint_verdict",
    "kpss_test",
    "mackinnon_pvalue",
    "mutual_information",
    "mutual_information_from_joint",
    "mutual_information_matrix",
    "pca_fit",
    "pca_project",
    "pca_reconstruct",
    "regularized_upper_gamma",
    "stationarity_report",
    "summary_stats",
]
