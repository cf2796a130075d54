"""Cohort assembly and expression normalization."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import CohortError, EmbeddingFormatError
from ..models import CaseRecord, Cohort, CohortManifest, PathwayDefinition
from .formats import read_embeddings, read_expression, read_manifest, read_pathways

log = logging.getLogger(__name__)


def resolve_pathways(pathways: list[PathwayDefinition],
                     available_genes: set[str]) -> list[PathwayDefinition]:
    """Intersect every pathway with the genes present in the expression matrix.

    Missing genes are dropped with a warning; a pathway left with no genes is
    an error.
    """
    resolved = []
    for pathway in pathways:
        kept = tuple(g for g in pathway.gene_ids if g in available_genes)
        dropped = [g for g in pathway.gene_ids if g not in available_genes]
        if not kept:
            raise CohortError(
                f"Pathway {pathway.name!r} has none of its {pathway.size} genes in the expression matrix"
            )
        if dropped:
            log.warning("Pathway %s: dropping %d gene(s) missing from the expression matrix: %s",
                        pathway.name, len(dropped), ", ".join(dropped))
        resolved.append(PathwayDefinition(pathway.name, kept))
    return resolved


def load_cohort(
    manifest: Union[str, Path, CohortManifest],
    expression: Optional[Path] = None,
    pathways: Optional[Path] = None,
    expected_dim: Optional[int] = None,
    workers: int = 4,
) -> Cohort:
    """Load every case listed in a manifest.

    Args:
        manifest: Manifest path or an already parsed manifest
        expression: Expression matrix path (default: beside the manifest)
        pathways: Pathway file path (default: beside the manifest)
        expected_dim: Required patch embedding dimension, if known
        workers: Threads used to read embedding files

    Returns:
        Cohort in manifest order, with the pathway gene lists actually used

    Raises:
        CohortError: On inconsistent or missing inputs
    """
    if not isinstance(manifest, CohortManifest):
        manifest = read_manifest(Path(manifest), expression, pathways)

    matrix = read_expression(manifest.expression_path)
    missing_cases = [cid for cid in manifest.case_ids if cid not in matrix.columns]
    if missing_cases:
        raise CohortError(
            f"{manifest.expression_path}: no expression column for case(s) {missing_cases}"
        )
    used_pathways = resolve_pathways(read_pathways(manifest.pathway_path), set(matrix.index))

    paths = [e.embedding_path for e in manifest.entries]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        embeddings = list(pool.map(lambda p: read_embeddings(p, expected_dim), paths))

    dim = embeddings[0].shape[1]
    for entry, emb in zip(manifest.entries, embeddings):
        if emb.shape[1] != dim:
            raise EmbeddingFormatError(
                f"{entry.embedding_path}: dimension {emb.shape[1]} differs from {dim} used by other cases"
            )

    case_ids = manifest.case_ids
    blocks = [matrix.loc[list(p.gene_ids), case_ids].to_numpy(dtype=np.float64) for p in used_pathways]

    cases = []
    for j, (entry, emb) in enumerate(zip(manifest.entries, embeddings)):
        cases.append(CaseRecord(
            case_id=entry.case_id,
            patch_embeddings=emb,
            pathway_inputs=[block[:, j].copy() for block in blocks],
            survival_months=entry.survival_months,
            event=entry.event,
        ))
    log.info("Loaded %d cases, %d pathways, patch dim %d", len(cases), len(used_pathways), dim)
    return Cohort(cases, used_pathways)


@dataclass
class ExpressionNormalizer:
    """Per-gene z-scoring with statistics taken from a training split."""

    means: list[np.ndarray]
    stds: list[np.ndarray]

    @classmethod
    def fit(cls, cases: Sequence[CaseRecord]) -> "ExpressionNormalizer":
        if not cases:
            raise CohortError("Cannot fit expression statistics on an empty split")
        n_pathways = cases[0].n_pathways
        means, stds = [], []
        for i in range(n_pathways):
            values = np.stack([c.pathway_inputs[i] for c in cases])
            std = values.std(axis=0)
            means.append(values.mean(axis=0))
            stds.append(np.where(std == 0, 1.0, std))
        return cls(means, stds)

    def transform_case(self, case: CaseRecord) -> CaseRecord:
        if case.n_pathways != len(self.means):
            raise CohortError(
                f"Case {case.case_id} has {case.n_pathways} pathways, normalizer expects {len(self.means)}"
            )
        inputs = [(x - m) / s for x, m, s in zip(case.pathway_inputs, self.means, self.stds)]
        return replace(case, pathway_inputs=inputs)

    def transform(self, cases: Sequence[CaseRecord]) -> list[CaseRecord]:
        return [self.transform_case(c) for c in cases]

    def to_dict(self) -> dict:
        return {
            "means": [m.tolist() for m in self.means],
            "stds": [s.tolist() for s in self.stds],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExpressionNormalizer":
        return cls(
            [np.asarray(m, dtype=np.float64) for m in data["means"]],
            [np.asarray(s, dtype=np.float64) for s in data["stds"]],
        )
