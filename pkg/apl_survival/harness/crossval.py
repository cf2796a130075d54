"""K-fold cross-validation: per-fold preprocessing, training, evaluation and aggregation."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..data.cohort import ExpressionNormalizer, load_cohort
from ..data.discretize import TimeBins
from ..data.folds import make_folds
from ..errors import ConfigError, FoldError
from ..models import (
    AplConfig, CaseRecord, Cohort, CohortManifest, ConcordanceReport, FoldAssignment,
    FoldReport, FoldResult, TrainConfig,
)
from ..network.apl import AplModel, forward
from ..network.checkpoint import save_checkpoint
from ..report.generator import write_fold_report
from ..survival.metrics import c_index, write_predictions
from .train import train_fold

log = logging.getLogger(__name__)

CohortSource = Union[Cohort, CohortManifest, str, Path]


@dataclass
class PreparedFold:
    """Normalized, binned splits of one fold plus the statistics used."""

    fold: int
    train: list[CaseRecord]
    test: list[CaseRecord]
    normalizer: ExpressionNormalizer
    bins: TimeBins

    def preprocessing(self) -> dict:
        return {"normalizer": self.normalizer.to_dict(), "bins": self.bins.to_dict()}


def config_for_cohort(apl_config: AplConfig, cohort: Cohort) -> AplConfig:
    """Copy of ``apl_config`` with the cohort's pathway layout filled in.

    Raises:
        ConfigError: If the cohort's patch dimension differs from ``d_in``
    """
    if cohort.d_in != apl_config.d_in:
        raise ConfigError(f"Cohort patch embeddings have dim {cohort.d_in}, apl.d_in is {apl_config.d_in}")
    return replace(apl_config, pathway_sizes=list(cohort.pathway_sizes),
                   pathway_names=list(cohort.pathway_names))


def preprocessing_from_dict(data: dict) -> tuple[ExpressionNormalizer, TimeBins]:
    return ExpressionNormalizer.from_dict(data["normalizer"]), TimeBins.from_dict(data["bins"])


def prepare_fold(cohort: Cohort, folds: FoldAssignment, fold: int, n_bins: int) -> PreparedFold:
    """Fit normalization and bins on the training split only and apply them to both splits.

    The cohort's cases are not modified; both splits are copies.
    """
    train_raw = [cohort[i] for i in folds.train_indices(fold)]
    test_raw = [cohort[i] for i in folds.test_indices(fold)]
    normalizer = ExpressionNormalizer.fit(train_raw)
    bins = TimeBins.fit([c.survival_months for c in train_raw], [c.event for c in train_raw], n_bins)
    return PreparedFold(
        fold=fold,
        train=bins.label(normalizer.transform(train_raw)),
        test=bins.label(normalizer.transform(test_raw)),
        normalizer=normalizer,
        bins=bins,
    )


def verify_preprocessing(cohort: Cohort, folds: FoldAssignment, fold: int,
                         preprocessing: dict, n_bins: int) -> bool:
    """Check stored preprocessing equals a fresh fit on the fold's training split."""
    normalizer, bins = preprocessing_from_dict(preprocessing)
    expected = prepare_fold(cohort, folds, fold, n_bins)
    same_bins = bins.n_bins == expected.bins.n_bins and np.array_equal(bins.edges, expected.bins.edges)
    same_stats = all(
        np.array_equal(a, b) for a, b in zip(normalizer.means + normalizer.stds,
                                             expected.normalizer.means + expected.normalizer.stds)
    )
    return same_bins and same_stats


def evaluate(model: AplModel, cases: Sequence[CaseRecord]) -> tuple[ConcordanceReport, np.ndarray]:
    """Eval-mode risks for ``cases`` and their C-index against the observed outcomes."""
    model.eval()
    risks = np.array([forward(model, c, training=False).survival().risk for c in cases], dtype=np.float64)
    report = c_index(risks, [c.survival_months for c in cases], [c.event for c in cases])
    return report, risks


def run_single_fold(
    cohort: Cohort,
    folds: FoldAssignment,
    fold: int,
    apl_config: AplConfig,
    train_config: TrainConfig,
    out_dir: Optional[Path] = None,
    progress: bool = False,
) -> FoldResult:
    """Train and evaluate one fold; fold k uses seeds offset by k.

    With ``out_dir`` set, writes ``fold_k/checkpoint.aplc`` and
    ``fold_k/predictions.csv``.
    """
    log.info("Fold %d: preparing splits", fold)
    prepared = prepare_fold(cohort, folds, fold, apl_config.n_bins)
    fold_apl = replace(apl_config, seed=apl_config.seed + fold)
    fold_train = replace(train_config, seed=train_config.seed + fold)
    model, history = train_fold(prepared.train, [], fold_apl, fold_train, progress=progress)
    report, risks = evaluate(model, prepared.test)

    checkpoint = ""
    if out_dir is not None:
        fold_dir = Path(out_dir) / f"fold_{fold}"
        save_checkpoint(fold_dir / "checkpoint.aplc", model, prepared.preprocessing())
        write_predictions(fold_dir / "predictions.csv", [c.case_id for c in prepared.test], risks,
                          [c.survival_months for c in prepared.test], [c.event for c in prepared.test])
        checkpoint = f"fold_{fold}/checkpoint.aplc"

    if report.is_defined:
        log.info("Fold %d: test C-index %.4f over %d pairs", fold, report.c_index, report.comparable_pairs)
    else:
        log.warning("Fold %d: C-index undefined (no comparable pairs in %d test cases)", fold, len(prepared.test))
    return FoldResult(
        fold=fold,
        c_index=report.c_index,
        comparable_pairs=report.comparable_pairs,
        n_train=len(prepared.train),
        n_test=len(prepared.test),
        n_test_events=sum(int(c.event) for c in prepared.test),
        final_train_loss=history.final_loss,
        bin_edges=prepared.bins.edges.tolist(),
        checkpoint=checkpoint,
    )


def _fold_worker(args: tuple) -> FoldResult:
    return run_single_fold(*args)


def aggregate(c_indices: Sequence[Optional[float]]) -> tuple[Optional[float], Optional[float]]:
    """Mean and population std over the defined fold C-indices."""
    defined = np.array([c for c in c_indices if c is not None], dtype=np.float64)
    if defined.size == 0:
        return None, None
    return float(defined.mean()), float(defined.std())


def resolve_cohort(source: CohortSource, d_in: Optional[int] = None, workers: int = 4) -> Cohort:
    if isinstance(source, Cohort):
        return source
    return load_cohort(source, expected_dim=d_in, workers=workers)


def run_cv(
    source: CohortSource,
    apl_config: AplConfig,
    train_config: TrainConfig,
    out_dir: Optional[Path] = None,
    workers: int = 1,
    label: str = "APL",
    only_fold: Optional[int] = None,
    folds: Optional[FoldAssignment] = None,
    progress: bool = False,
) -> FoldReport:
    """Run K-fold cross-validation.

    Args:
        source: Loaded cohort or a manifest to load it from
        apl_config: Architecture; pathway layout is taken from the cohort
        train_config: Optimization settings, including ``folds`` and ``seed``
        out_dir: Where checkpoints, predictions and reports go (None: nothing written)
        workers: Folds trained in parallel processes when > 1
        label: Name of the run in reports
        only_fold: Train just this fold of the split
        folds: Precomputed assignment to share between runs

    Returns:
        FoldReport with folds ordered by index
    """
    started = time.perf_counter()
    cohort = resolve_cohort(source, apl_config.d_in)
    config = config_for_cohort(apl_config, cohort)
    if folds is None:
        folds = make_folds(cohort.cases, train_config.folds, train_config.seed)
    if only_fold is not None and not 0 <= only_fold < folds.k:
        raise FoldError(f"Fold {only_fold} out of range for {folds.k} folds")
    fold_ids = list(range(folds.k)) if only_fold is None else [only_fold]

    jobs = [(cohort, folds, k, config, train_config, out_dir, progress and workers <= 1) for k in fold_ids]
    if workers > 1 and len(jobs) > 1:
        log.info("Training %d folds on %d workers", len(jobs), min(workers, len(jobs)))
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_fold_worker, jobs))
    else:
        results = [_fold_worker(job) for job in jobs]
    results.sort(key=lambda r: r.fold)

    mean, std = aggregate([r.c_index for r in results])
    train_echo = asdict(train_config)
    train_echo["betas"] = list(train_config.betas)
    report = FoldReport(
        label=label,
        folds=results,
        mean=mean,
        std=std,
        config={"apl": asdict(config), "train": train_echo},
        wall_time_s=time.perf_counter() - started,
    )
    log.info("%s: C-index %s over %d folds", label, report.summary(), len(results))
    if out_dir is not None:
        write_fold_report(report, Path(out_dir))
    return report
