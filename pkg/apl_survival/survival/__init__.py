"""Survival loss and evaluation metrics."""

from .loss import PROB_EPS, nll_survival_loss
from .metrics import c_index, read_predictions, risk_score, survival_output, write_predictions

__all__ = [
    "PROB_EPS",
    "c_index",
    "nll_survival_loss",
    "read_predictions",
    "risk_score",
    "survival_output",
    "write_predictions",
]
