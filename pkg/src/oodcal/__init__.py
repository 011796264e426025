"""oodcal: threshold calibration and label-shift robustness toolkit for
out-of-distribution detection on classifier logit dumps."""

from .analyze import (
    DistancePair,
    GridSearchResult,
    GridSpec,
    correlate_difficulty,
    distance_table,
    energy_distance,
    grid_search,
    pearson,
    wasserstein_1d,
)
from .calibrate import (
    SCHEME_MULTI,
    SCHEME_ONE,
    ThresholdModel,
    decide,
    fit_threshold_multi,
    fit_threshold_one,
    tpr_beta_cutoff,
)
from .dataset import (
    IN_DISTRIBUTION,
    OUT_OF_DISTRIBUTION,
    ClassWeights,
    LogitDataset,
    SampleRow,
    load_dataset,
    resample_by_class,
    save_dataset,
    split_dataset,
)
from .evaluate import (
    EvaluationReport,
    TprSummary,
    build_report,
    missed_detection_rate,
    per_class_tpr,
)
from .scores import (
    DetectorModel,
    ScoreVector,
    argmax_class,
    energy_score,
    fit_knn,
    fit_mahalanobis,
    knn_score,
    mahalanobis_score,
    max_logit_score,
    max_softmax_score,
    score_dataset,
)
from .simulate import (
    SimplexSample,
    TrialRecord,
    derive_trial_seed,
    perturbation_sweep,
    sample_simplex,
    simulate_label_shift,
    simulate_oversampling,
)

__version__ = "0.1.0"

__all__ = [
    "ClassWeights",
    "DetectorModel",
    "DistancePair",
    "EvaluationReport",
    "GridSearchResult",
    "GridSpec",
    "IN_DISTRIBUTION",
    "LogitDataset",
    "OUT_OF_DISTRIBUTION",
    "SCHEME_MULTI",
    "SCHEME_ONE",
    "SampleRow",
    "ScoreVector",
    "SimplexSample",
    "ThresholdModel",
    "TprSummary",
    "TrialRecord",
    "argmax_class",
    "build_report",
    "correlate_difficulty",
    "decide",
    "derive_trial_seed",
    "distance_table",
    "energy_distance",
    "energy_score",
    "fit_knn",
    "fit_mahalanobis",
    "fit_threshold_multi",
    "fit_threshold_one",
    "grid_search",
    "knn_score",
    "load_dataset",
    "mahalanobis_score",
    "max_logit_score",
    "max_softmax_score",
    "missed_detection_rate",
    "pearson",
    "per_class_tpr",
    "perturbation_sweep",
    "resample_by_class",
    "sample_simplex",
    "save_dataset",
    "score_dataset",
    "simulate_label_shift",
    "simulate_oversampling",
    "split_dataset",
    "tpr_beta_cutoff",
    "wasserstein_1d",
]
