"""The four-configuration ablation over one or more cohorts."""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Mapping, Optional

from ..data.folds import make_folds
from ..errors import EmptyInputError
from ..fileio import atomic_write_text
from ..models import ABLATION_ROWS, AblationTable, AplConfig, FoldReport, TrainConfig
from ..report.generator import ablation_table_csv, generate_ablation_report
from .crossval import CohortSource, resolve_cohort, run_cv

log = logging.getLogger(__name__)


def run_ablation(
    cohorts: Mapping[str, CohortSource],
    apl_config: AplConfig,
    train_config: TrainConfig,
    out_dir: Optional[Path] = None,
    workers: int = 1,
) -> AblationTable:
    """Cross-validate every ablation row on every cohort.

    All rows of a cohort share one fold assignment and the same seeds, so
    they differ only in which components are enabled. The ablation field
    of ``apl_config`` is ignored.

    With ``out_dir`` set, each cell writes its run under
    ``<out_dir>/<cohort>/<row>/`` and the table goes to
    ``ablation.csv`` and ``ablation.md``.
    """
    if not cohorts:
        raise EmptyInputError("run_ablation needs at least one cohort")

    names = list(cohorts)
    loaded = {name: resolve_cohort(src, apl_config.d_in) for name, src in cohorts.items()}
    shared_folds = {name: make_folds(c.cases, train_config.folds, train_config.seed)
                    for name, c in loaded.items()}

    rows: list[tuple] = []
    for row in ABLATION_ROWS:
        config = replace(apl_config, ablation=row.ablation)
        reports: dict[str, FoldReport] = {}
        for name in names:
            log.info("Ablation %s on %s", row.value, name)
            run_dir = None if out_dir is None else Path(out_dir) / name / row.value
            reports[name] = run_cv(loaded[name], config, train_config, out_dir=run_dir,
                                   workers=workers, label=f"{row.ablation.label} ({name})",
                                   folds=shared_folds[name])
        rows.append((row, reports))

    table = AblationTable(cohorts=names, rows=rows)
    if out_dir is not None:
        atomic_write_text(Path(out_dir) / "ablation.csv", ablation_table_csv(table))
        atomic_write_text(Path(out_dir) / "ablation.md", generate_ablation_report(table))
    return table
