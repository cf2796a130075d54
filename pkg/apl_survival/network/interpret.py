"""Export of prototype attention maps for inspection."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import ConfigError
from ..fileio import atomic_write_text
from ..models import CaseRecord
from .apl import AplModel, forward

log = logging.getLogger(__name__)


@dataclass
class PrototypeAttention:
    """One prototype's attention row and its strongest tokens."""

    prototype: int
    weights: np.ndarray
    top_indices: list[int]
    top_labels: list[str] = field(default_factory=list)


@dataclass
class InterpretationReport:
    case_id: str
    histology: list[PrototypeAttention]
    genomic: list[PrototypeAttention]
    pathway_names: list[str] = field(default_factory=list)


def _top_k(weights: np.ndarray, k: int, what: str) -> list[int]:
    if k > weights.size:
        log.warning("Requested top-%d %s but only %d exist; using %d", k, what, weights.size, weights.size)
        k = weights.size
    order = np.argsort(-weights, kind="stable")
    return [int(i) for i in order[:k]]


def _pick_prototypes(n: int, n_prototypes: Optional[int], rng: np.random.Generator) -> list[int]:
    if n_prototypes is None or n_prototypes >= n:
        return list(range(n))
    return sorted(int(i) for i in rng.choice(n, size=n_prototypes, replace=False))


def export_interpretation(
    model: AplModel,
    case: CaseRecord,
    top_k_patches: int = 3,
    top_k_pathways: int = 6,
    n_prototypes: Optional[int] = None,
    seed: int = 0,
) -> InterpretationReport:
    """Collect cross-attention rows for a case in eval mode.

    Args:
        model: Trained network
        case: Normalized case to explain
        top_k_patches: Patches listed per histology prototype
        top_k_pathways: Pathways listed per genomic prototype
        n_prototypes: If set, a seeded random subset of prototypes per modality
        seed: Seed for the prototype subset

    Raises:
        ConfigError: If the model has no prototype branch
    """
    ab = model.config.ablation
    if not (ab.use_hist_prototypes or ab.use_gene_prototypes):
        raise ConfigError("Model has no prototype branch to interpret")

    result = forward(model, case, training=False)
    rng = np.random.default_rng(seed)
    names = model.config.pathway_names or [f"pathway_{i}" for i in range(model.config.n_pathways)]

    histology = []
    if result.hist_attention is not None:
        attn = result.hist_attention
        for p in _pick_prototypes(attn.shape[0], n_prototypes, rng):
            histology.append(PrototypeAttention(p, attn[p].copy(), _top_k(attn[p], top_k_patches, "patches")))

    genomic = []
    if result.gene_attention is not None:
        attn = result.gene_attention
        for p in _pick_prototypes(attn.shape[0], n_prototypes, rng):
            top = _top_k(attn[p], top_k_pathways, "pathways")
            genomic.append(PrototypeAttention(p, attn[p].copy(), top, [names[i] for i in top]))

    return InterpretationReport(case.case_id, histology, genomic, list(names))


def write_interpretation(report: InterpretationReport, out_dir: Path) -> list[Path]:
    """Write one attention CSV per prototype plus top-k summaries.

    Returns:
        Paths of every file written
    """
    out_dir = Path(out_dir)
    written: list[Path] = []

    def emit(path: Path, frame: pd.DataFrame) -> None:
        atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))
        written.append(path)

    hist_rows = []
    for proto in report.histology:
        emit(out_dir / f"hist_prototype_{proto.prototype:03d}.csv",
             pd.DataFrame({"patch_index": np.arange(proto.weights.size), "weight": proto.weights}))
        for rank, idx in enumerate(proto.top_indices, start=1):
            hist_rows.append((proto.prototype, rank, idx, proto.weights[idx]))
    if report.histology:
        emit(out_dir / "hist_topk.csv",
             pd.DataFrame(hist_rows, columns=["prototype", "rank", "patch_index", "weight"]))

    gene_rows = []
    for proto in report.genomic:
        emit(out_dir / f"gene_prototype_{proto.prototype:03d}.csv",
             pd.DataFrame({"pathway_index": np.arange(proto.weights.size),
                           "pathway": report.pathway_names[:proto.weights.size],
                           "weight": proto.weights}))
        for rank, (idx, label) in enumerate(zip(proto.top_indices, proto.top_labels), start=1):
            gene_rows.append((proto.prototype, rank, idx, label, proto.weights[idx]))
    if report.genomic:
        emit(out_dir / "gene_topk.csv",
             pd.DataFrame(gene_rows, columns=["prototype", "rank", "pathway_index", "pathway", "weight"]))
    return written
