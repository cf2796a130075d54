"""Hazard transforms, risk scores and Harrell's concordance index."""

from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.special import expit

from ..errors import DimensionError, NonFiniteError
from ..fileio import atomic_write_text
from ..models import ConcordanceReport, SurvivalOutput


def survival_output(logits) -> SurvivalOutput:
    """Hazards, survival curve and scalar risk from a logit vector."""
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    hazards = expit(logits)
    survival = np.cumprod(1.0 - hazards)
    return SurvivalOutput(logits=logits, hazards=hazards, survival=survival,
                          risk=float(-survival.sum()))


def risk_score(logits) -> float:
    """risk = -sum_t S(t); higher means shorter predicted survival."""
    return survival_output(logits).risk


def c_index(risks: Sequence[float], times: Sequence[float],
            events: Sequence[bool]) -> ConcordanceReport:
    """Harrell's C-index.

    A pair (i, j) is comparable when time_i < time_j and case i had the event.
    It is concordant when risk_i > risk_j; equal risks count one half. With no
    comparable pair the index is undefined (``c_index`` is None).
    """
    risks = np.asarray(risks, dtype=np.float64).reshape(-1)
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    events = np.asarray(events, dtype=bool).reshape(-1)
    if not risks.shape == times.shape == events.shape:
        raise DimensionError(
            f"c_index inputs differ in length: risks {risks.size}, times {times.size}, events {events.size}"
        )
    if not (np.isfinite(risks).all() and np.isfinite(times).all()):
        raise NonFiniteError(
            f"c_index needs finite inputs: {int(np.sum(~np.isfinite(risks)))} non-finite risks, "
            f"{int(np.sum(~np.isfinite(times)))} non-finite times"
        )

    comparable = (times[:, None] < times[None, :]) & events[:, None]
    concordant = int(np.sum(comparable & (risks[:, None] > risks[None, :])))
    tied = int(np.sum(comparable & (risks[:, None] == risks[None, :])))
    pairs = int(np.sum(comparable))
    value = (concordant + 0.5 * tied) / pairs if pairs else None
    return ConcordanceReport(c_index=value, comparable_pairs=pairs, concordant=concordant, tied=tied)


def write_predictions(path: Path, case_ids: Sequence[str], risks: Sequence[float],
                      times: Sequence[float], events: Sequence[bool]) -> None:
    """Dump per-case risks as ``case_id,risk,survival_months,event``."""
    frame = pd.DataFrame({
        "case_id": list(case_ids),
        "risk": np.asarray(risks, dtype=np.float64),
        "survival_months": np.asarray(times, dtype=np.float64),
        "event": np.asarray(events, dtype=bool).astype(int),
    })
    atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def read_predictions(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"case_id": str}, float_precision="round_trip")
