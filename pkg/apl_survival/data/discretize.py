"""Survival-time discretization into quantile bins."""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import DiscretizationError
from ..models import CaseRecord


@dataclass
class TimeBins:
    """Interior bin edges over survival months.

    ``edges`` holds the n_bins - 1 interior cut points; the outer bins are
    unbounded. A time equal to an edge belongs to the lower bin.
    """

    edges: np.ndarray
    n_bins: int

    @classmethod
    def fit(cls, times: Sequence[float], events: Sequence[bool], n_bins: int) -> "TimeBins":
        """Place edges at the k/n_bins quantiles of the uncensored times.

        Raises:
            DiscretizationError: If fewer than ``n_bins`` distinct uncensored times exist
        """
        if n_bins < 1:
            raise DiscretizationError(f"Bin count must be >= 1, got {n_bins}")
        times = np.asarray(times, dtype=np.float64)
        events = np.asarray(events, dtype=bool)
        uncensored = times[events]
        distinct = np.unique(uncensored).size
        if distinct < n_bins:
            raise DiscretizationError(
                f"Only {distinct} distinct uncensored survival times for {n_bins} bins; "
                f"use n_bins <= {max(distinct, 1)}"
            )
        quantiles = np.arange(1, n_bins) / n_bins
        edges = np.quantile(uncensored, quantiles) if n_bins > 1 else np.empty(0)
        return cls(np.asarray(edges, dtype=np.float64), n_bins)

    def assign(self, time: float) -> int:
        return int(np.searchsorted(self.edges, time, side="left"))

    def assign_all(self, times: Sequence[float]) -> np.ndarray:
        return np.searchsorted(self.edges, np.asarray(times, dtype=np.float64), side="left")

    def label(self, cases: Sequence[CaseRecord]) -> list[CaseRecord]:
        """Return copies of ``cases`` with their bin set; inputs are untouched."""
        return [replace(c, bin=self.assign(c.survival_months)) for c in cases]

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "n_bins": self.n_bins}

    @classmethod
    def from_dict(cls, data: dict) -> "TimeBins":
        return cls(np.asarray(data["edges"], dtype=np.float64), int(data["n_bins"]))


def discretize_survival(cases: Sequence[CaseRecord], n_bins: int,
                        fit_on: Optional[Sequence[CaseRecord]] = None) -> TimeBins:
    """Fit bins and set ``bin`` on every case in place.

    Args:
        cases: Cases to label
        n_bins: Number of time bins
        fit_on: Cases whose uncensored times define the edges (default: ``cases``)

    Returns:
        The fitted bins, kept for reporting and for labelling other splits
    """
    source = cases if fit_on is None else fit_on
    bins = TimeBins.fit([c.survival_months for c in source], [c.event for c in source], n_bins)
    for case in cases:
        case.bin = bins.assign(case.survival_months)
    return bins
