"""Data models for apl-survival."""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

import numpy as np


class Severity(Enum):
    """Severity level for config findings."""
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class Finding:
    """A problem found while checking a run configuration."""

    id: str
    severity: Severity
    title: str
    details: str
    field: str = ""

    def __hash__(self):
        return hash(self.id)


@dataclass(frozen=True)
class AblationConfig:
    """Which APL components are switched on."""

    use_hist_prototypes: bool = True
    use_gene_prototypes: bool = True
    use_self_attention: bool = True

    @property
    def is_baseline(self) -> bool:
        return not (self.use_hist_prototypes or self.use_gene_prototypes or self.use_self_attention)

    @property
    def label(self) -> str:
        parts = []
        if self.use_hist_prototypes:
            parts.append("Hist.")
        if self.use_gene_prototypes:
            parts.append("Geno.")
        if self.use_self_attention:
            parts.append("Self-attn.")
        return " + ".join(parts) if parts else "Concat baseline"


class AblationRow(Enum):
    """The four configurations of the ablation table, in table order."""
    BASELINE = "baseline"
    HIST = "hist"
    HIST_GENO = "hist_geno"
    FULL = "full"

    @property
    def ablation(self) -> AblationConfig:
        return {
            AblationRow.BASELINE: AblationConfig(False, False, False),
            AblationRow.HIST: AblationConfig(True, False, False),
            AblationRow.HIST_GENO: AblationConfig(True, True, False),
            AblationRow.FULL: AblationConfig(True, True, True),
        }[self]


ABLATION_ROWS = [AblationRow.BASELINE, AblationRow.HIST, AblationRow.HIST_GENO, AblationRow.FULL]


@dataclass
class AplConfig:
    """Architecture hyperparameters.

    ``pathway_sizes`` and ``pathway_names`` describe the genomic input and are
    filled in from the cohort before a model is built.
    """

    d_in: int = 1024
    d_model: int = 256
    snn_hidden: int = 512
    n_hist_queries: int = 300
    n_gene_queries: int = 128
    n_bins: int = 4
    ablation: AblationConfig = field(default_factory=AblationConfig)
    seed: int = 0
    snn_dropout: float = 0.25
    patch_encoder: str = "linear"  # linear, mlp
    patch_hidden: int = 512
    residual: bool = False
    init_std: float = 0.02
    pathway_sizes: list[int] = field(default_factory=list)
    pathway_names: list[str] = field(default_factory=list)

    @property
    def n_pathways(self) -> int:
        return len(self.pathway_sizes)


@dataclass
class TrainConfig:
    """Optimization and cross-validation settings."""

    lr: float = 5e-4
    weight_decay: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    folds: int = 5
    alpha: float = 0.0  # censored-term weight of the NLL loss


@dataclass
class RunPaths:
    """Filesystem locations of a run."""

    manifest: str = ""
    expression: Optional[str] = None
    pathways: Optional[str] = None
    output_dir: str = "runs"


@dataclass
class RunConfig:
    """A complete run configuration file."""

    apl: AplConfig = field(default_factory=AplConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: RunPaths = field(default_factory=RunPaths)
    workers: int = 1


@dataclass(frozen=True)
class PathwayDefinition:
    """A named gene set."""

    name: str
    gene_ids: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.gene_ids)


@dataclass
class CaseRecord:
    """One patient: patch embeddings, pathway expression vectors and survival label."""

    case_id: str
    patch_embeddings: np.ndarray  # N_H x D_in, float64
    pathway_inputs: list[np.ndarray]
    survival_months: float
    event: bool
    bin: Optional[int] = None

    @property
    def n_patches(self) -> int:
        return int(self.patch_embeddings.shape[0])

    @property
    def n_pathways(self) -> int:
        return len(self.pathway_inputs)


@dataclass(frozen=True)
class ManifestEntry:
    """One manifest row."""

    case_id: str
    embedding_path: Path
    survival_months: float
    event: bool


@dataclass
class CohortManifest:
    """Parsed manifest plus the locations of the shared cohort files."""

    entries: list[ManifestEntry]
    expression_path: Path
    pathway_path: Path

    @property
    def case_ids(self) -> list[str]:
        return [e.case_id for e in self.entries]


@dataclass
class Cohort:
    """Loaded cases together with the pathway gene lists actually used."""

    cases: list[CaseRecord]
    pathways: list[PathwayDefinition]

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[CaseRecord]:
        return iter(self.cases)

    def __getitem__(self, index: int) -> CaseRecord:
        return self.cases[index]

    @property
    def pathway_names(self) -> list[str]:
        return [p.name for p in self.pathways]

    @property
    def pathway_sizes(self) -> list[int]:
        return [p.size for p in self.pathways]

    @property
    def d_in(self) -> int:
        return self.cases[0].patch_embeddings.shape[1] if self.cases else 0

    def find(self, case_id: str) -> CaseRecord:
        for case in self.cases:
            if case.case_id == case_id:
                return case
        raise KeyError(case_id)


@dataclass
class FoldAssignment:
    """Per-case fold index, aligned with the cohort order."""

    case_ids: list[str]
    folds: np.ndarray
    k: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)

    def sizes(self) -> list[int]:
        return [int(np.sum(self.folds == i)) for i in range(self.k)]


@dataclass
class SurvivalOutput:
    """Discrete-time prediction for one case."""

    logits: np.ndarray
    hazards: np.ndarray
    survival: np.ndarray
    risk: float


@dataclass
class ConcordanceReport:
    """Harrell's C-index with its pair counts.

    ``c_index`` is None when no pair is comparable.
    """

    c_index: Optional[float]
    comparable_pairs: int
    concordant: int
    tied: int

    @property
    def is_defined(self) -> bool:
        return self.c_index is not None


@dataclass
class FoldResult:
    """Outcome of one cross-validation fold."""

    fold: int
    c_index: Optional[float]
    comparable_pairs: int
    n_train: int
    n_test: int
    n_test_events: int
    final_train_loss: float
    bin_edges: list[float]
    checkpoint: str = ""


@dataclass
class FoldReport:
    """Per-fold and aggregate test C-index of a cross-validation run."""

    label: str
    folds: list[FoldResult]
    mean: Optional[float]
    std: Optional[float]
    config: dict
    wall_time_s: float = 0.0

    @property
    def fold_c_indices(self) -> list[Optional[float]]:
        return [f.c_index for f in self.folds]

    def summary(self) -> str:
        """Return the "mean ± std" cell used in result tables."""
        if self.mean is None:
            return "undefined"
        return f"{self.mean:.3f} ± {self.std:.3f}"


@dataclass
class AblationTable:
    """Ablation configurations (rows) by cohorts (columns)."""

    cohorts: list[str]
    rows: list[tuple[AblationRow, dict[str, FoldReport]]]

    def average(self, row: AblationRow) -> Optional[float]:
        for r, reports in self.rows:
            if r is row:
                means = [rep.mean for rep in reports.values() if rep.mean is not None]
                return float(np.mean(means)) if means else None
        raise KeyError(row)
