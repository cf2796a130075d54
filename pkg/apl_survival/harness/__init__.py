"""Training, cross-validation and ablation."""

from .ablation import run_ablation
from .crossval import (
    PreparedFold,
    aggregate,
    config_for_cohort,
    evaluate,
    prepare_fold,
    preprocessing_from_dict,
    run_cv,
    run_single_fold,
    verify_preprocessing,
)
from .train import TrainHistory, case_loss, mean_loss, train_fold

__all__ = [
    "PreparedFold",
    "TrainHistory",
    "aggregate",
    "case_loss",
    "config_for_cohort",
    "evaluate",
    "mean_loss",
    "prepare_fold",
    "preprocessing_from_dict",
    "run_ablation",
    "run_cv",
    "run_single_fold",
    "train_fold",
    "verify_preprocessing",
]
