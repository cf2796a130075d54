"""Cross-validation fold assignment."""

import logging
from typing import Sequence

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from ..errors import FoldError
from ..models import CaseRecord, FoldAssignment

log = logging.getLogger(__name__)


def make_folds(cases: Sequence[CaseRecord], k: int, seed: int) -> FoldAssignment:
    """Shuffle and split cases into ``k`` folds stratified by event indicator.

    Falls back to plain shuffled K-fold when neither the event nor the
    censored group has ``k`` members.

    Raises:
        FoldError: If there are fewer cases than folds or k < 2
    """
    n = len(cases)
    if k < 2:
        raise FoldError(f"Cross-validation needs at least 2 folds, got {k}")
    if n < k:
        raise FoldError(f"Cannot split {n} cases into {k} folds")

    events = np.array([int(c.event) for c in cases])
    index = np.zeros((n, 1))
    class_counts = np.bincount(events, minlength=2)
    if class_counts.max() >= k:
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
        splits = splitter.split(index, events)
    else:
        log.warning("No event class has %d members; using unstratified folds", k)
        splits = KFold(n_splits=k, shuffle=True, random_state=seed).split(index)

    folds = np.full(n, -1, dtype=np.int64)
    for fold, (_, test) in enumerate(splits):
        folds[test] = fold
    return FoldAssignment([c.case_id for c in cases], folds, k)
