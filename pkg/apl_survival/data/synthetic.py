"""Synthetic cohorts with a planted multimodal risk signal.

Each case gets patches drawn from Gaussian clusters, one of which (cluster 0)
is "malignant", and an expression profile in which a few signal pathways
carry a per-case activity shift. The latent risk combines the realized
malignant-patch fraction with the mean expression of the signal genes, and
survival times are exponential with a log-rate proportional to it.
"""

import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import CohortError, GeneratorError
from ..fileio import atomic_write_text, commit_staging_dir, make_staging_dir
from ..models import CaseRecord, Cohort, ConcordanceReport, PathwayDefinition
from ..survival.metrics import c_index
from .formats import read_manifest, write_embeddings, write_expression, write_manifest, write_pathways

log = logging.getLogger(__name__)

MALIGNANT_CLUSTER = 0
MALIGNANT_FRACTION_RANGE = (0.05, 0.6)
SIGNAL_ACTIVITY_RANGE = (-1.5, 1.5)
LOG_RATE_SCALE = 8.0


@dataclass
class SyntheticParams:
    """Knobs of the planted-signal generator."""

    n_cases: int = 200
    n_patches_range: tuple[int, int] = (20, 60)
    d_in: int = 32
    n_pathways: int = 8
    genes_per_pathway: tuple[int, int] = (5, 15)
    n_signal_pathways: int = 2
    n_clusters: int = 4
    cluster_scale: float = 3.0
    patch_noise: float = 1.0
    signal_strength: float = 2.0
    censor_rate: float = 0.3
    base_rate: float = 1.0 / 30.0
    seed: int = 0

    def validate(self) -> None:
        lo, hi = self.n_patches_range
        g_lo, g_hi = self.genes_per_pathway
        problems = []
        if self.n_cases < 2:
            problems.append(f"n_cases must be >= 2 (got {self.n_cases})")
        if lo < 1 or hi < lo:
            problems.append(f"n_patches_range must satisfy 1 <= low <= high (got {lo}, {hi})")
        if self.d_in < 1:
            problems.append(f"d_in must be >= 1 (got {self.d_in})")
        if self.n_pathways < 1:
            problems.append(f"n_pathways must be >= 1 (got {self.n_pathways})")
        if g_lo < 1 or g_hi < g_lo:
            problems.append(f"genes_per_pathway must satisfy 1 <= low <= high (got {g_lo}, {g_hi})")
        if not 0 <= self.n_signal_pathways <= self.n_pathways:
            problems.append(f"n_signal_pathways must lie in [0, {self.n_pathways}] (got {self.n_signal_pathways})")
        if self.n_clusters < 2:
            problems.append(f"n_clusters must be >= 2 (got {self.n_clusters})")
        if self.signal_strength < 0:
            problems.append(f"signal_strength must be >= 0 (got {self.signal_strength})")
        if not 0 <= self.censor_rate < 1:
            problems.append(f"censor_rate must lie in [0, 1) (got {self.censor_rate})")
        if self.base_rate <= 0:
            problems.append(f"base_rate must be > 0 (got {self.base_rate})")
        if problems:
            raise GeneratorError("; ".join(problems))


@dataclass
class SyntheticCohort:
    """An in-memory synthetic cohort before it is written out."""

    case_ids: list[str]
    embeddings: list[np.ndarray]
    patch_clusters: list[np.ndarray]
    gene_ids: list[str]
    expression: np.ndarray  # genes x cases
    pathways: list[PathwayDefinition]
    survival_months: np.ndarray
    events: np.ndarray
    latent_risk: np.ndarray
    malignant_fraction: np.ndarray
    genomic_score: np.ndarray
    params: SyntheticParams = field(default_factory=SyntheticParams)

    def oracle(self) -> ConcordanceReport:
        return oracle_c_index(self.latent_risk, self.survival_months, self.events)

    def to_cohort(self) -> Cohort:
        """The cases as load_cohort would read them back from disk."""
        row = {gene: i for i, gene in enumerate(self.gene_ids)}
        blocks = [self.expression[[row[g] for g in p.gene_ids], :] for p in self.pathways]
        cases = [
            CaseRecord(
                case_id=case_id,
                patch_embeddings=emb.copy(),
                pathway_inputs=[block[:, j].copy() for block in blocks],
                survival_months=float(self.survival_months[j]),
                event=bool(self.events[j]),
            )
            for j, (case_id, emb) in enumerate(zip(self.case_ids, self.embeddings))
        ]
        return Cohort(cases, list(self.pathways))


def _zscore(x: np.ndarray) -> np.ndarray:
    std = x.std()
    return (x - x.mean()) / std if std > 0 else np.zeros_like(x)


def simulate_cohort(params: SyntheticParams) -> SyntheticCohort:
    """Draw a cohort in memory; bit-reproducible for a fixed seed."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    n = params.n_cases

    centers = rng.normal(0.0, params.cluster_scale, size=(params.n_clusters, params.d_in))

    pathways: list[PathwayDefinition] = []
    gene_ids: list[str] = []
    for p in range(params.n_pathways):
        size = int(rng.integers(params.genes_per_pathway[0], params.genes_per_pathway[1] + 1))
        genes = tuple(f"G{len(gene_ids) + i:05d}" for i in range(size))
        gene_ids.extend(genes)
        pathways.append(PathwayDefinition(f"PATHWAY_{p:03d}", genes))

    case_ids = [f"case_{i:04d}" for i in range(n)]
    embeddings, clusters = [], []
    realized = np.empty(n)
    for i in range(n):
        n_patches = int(rng.integers(params.n_patches_range[0], params.n_patches_range[1] + 1))
        target = rng.uniform(*MALIGNANT_FRACTION_RANGE)
        malignant = rng.random(n_patches) < target
        benign = rng.integers(1, params.n_clusters, size=n_patches)
        labels = np.where(malignant, MALIGNANT_CLUSTER, benign)
        noise = rng.normal(0.0, params.patch_noise, size=(n_patches, params.d_in))
        # stored as float32 on disk; keep the in-memory copy identical
        patches = (centers[labels] + noise).astype(np.float32).astype(np.float64)
        embeddings.append(patches)
        clusters.append(labels)
        realized[i] = float(np.mean(labels == MALIGNANT_CLUSTER))

    expression = rng.normal(0.0, 1.0, size=(len(gene_ids), n))
    signal_rows: list[int] = []
    offset = 0
    for p, pathway in enumerate(pathways):
        rows = list(range(offset, offset + pathway.size))
        offset += pathway.size
        if p < params.n_signal_pathways:
            activity = rng.uniform(*SIGNAL_ACTIVITY_RANGE, size=n)
            expression[rows, :] += activity[None, :]
            signal_rows.extend(rows)
    genomic_score = expression[signal_rows, :].mean(axis=0) if signal_rows else np.zeros(n)

    latent = _zscore(_zscore(realized) + _zscore(genomic_score))
    rate = params.base_rate * np.exp(LOG_RATE_SCALE * params.signal_strength * latent)
    true_time = rng.exponential(1.0 / rate)
    censored = rng.random(n) < params.censor_rate
    fraction = rng.random(n)
    observed = np.where(censored, fraction * true_time, true_time)

    return SyntheticCohort(
        case_ids=case_ids,
        embeddings=embeddings,
        patch_clusters=clusters,
        gene_ids=gene_ids,
        expression=expression,
        pathways=pathways,
        survival_months=observed,
        events=~censored,
        latent_risk=latent,
        malignant_fraction=realized,
        genomic_score=genomic_score,
        params=params,
    )


def oracle_c_index(latent_risk, times, events) -> ConcordanceReport:
    """Score the cohort with its own latent risk; the ceiling any model can reach."""
    return c_index(latent_risk, times, events)


def write_cohort(cohort: SyntheticCohort, directory: Path) -> Path:
    """Write every cohort file into ``directory``; returns the manifest path."""
    directory = Path(directory)
    emb_dir = directory / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for case_id, emb, months, event in zip(cohort.case_ids, cohort.embeddings,
                                            cohort.survival_months, cohort.events):
        rel = f"embeddings/{case_id}.pemb"
        write_embeddings(directory / rel, emb)
        rows.append((case_id, rel, float(months), bool(event)))

    manifest_path = directory / "manifest.csv"
    write_manifest(manifest_path, rows)
    write_expression(directory / "expression.csv", cohort.gene_ids, cohort.case_ids, cohort.expression)
    write_pathways(directory / "pathways.tsv", cohort.pathways)

    latent = pd.DataFrame({
        "case_id": cohort.case_ids,
        "latent_risk": cohort.latent_risk,
        "malignant_fraction": cohort.malignant_fraction,
        "genomic_score": cohort.genomic_score,
    })
    atomic_write_text(directory / "latent.csv",
                      latent.to_csv(index=False, float_format="%.17g", lineterminator="\n"))

    clusters = pd.DataFrame(
        [(cid, j, int(label)) for cid, labels in zip(cohort.case_ids, cohort.patch_clusters)
         for j, label in enumerate(labels)],
        columns=["case_id", "patch_index", "cluster"],
    )
    atomic_write_text(directory / "patch_clusters.csv", clusters.to_csv(index=False, lineterminator="\n"))
    return manifest_path


def generate_synthetic(out_dir: Path, params: Optional[SyntheticParams] = None,
                       force: bool = False) -> tuple[SyntheticCohort, Path]:
    """Simulate a cohort and write it to ``out_dir`` atomically.

    Files are written into a staging directory beside ``out_dir`` and moved
    into place only once complete.

    Returns:
        Tuple of (cohort, manifest path)

    Raises:
        GeneratorError: On invalid parameters or a non-empty ``out_dir`` without ``force``
    """
    params = params or SyntheticParams()
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise GeneratorError(f"Output directory {out_dir} is not empty; pass force to overwrite")

    cohort = simulate_cohort(params)
    staging = make_staging_dir(out_dir)
    try:
        write_cohort(cohort, staging)
        commit_staging_dir(staging, out_dir)
    except BaseException:
        if staging.exists():
            shutil.rmtree(staging, ignore_errors=True)
        raise
    log.info("Wrote %d synthetic cases to %s", params.n_cases, out_dir)
    return cohort, out_dir / "manifest.csv"


def load_latent(directory: Path) -> pd.DataFrame:
    return pd.read_csv(Path(directory) / "latent.csv", dtype={"case_id": str}, float_precision="round_trip")


def load_patch_clusters(directory: Path) -> dict[str, np.ndarray]:
    """Cluster label of every patch, keyed by case id."""
    frame = pd.read_csv(Path(directory) / "patch_clusters.csv", dtype={"case_id": str})
    return {
        case_id: group.sort_values("patch_index")["cluster"].to_numpy()
        for case_id, group in frame.groupby("case_id", sort=False)
    }


def oracle_from_files(directory: Path) -> ConcordanceReport:
    """Re-score a written cohort from its ``latent.csv`` and ``manifest.csv``.

    Raises:
        CohortError: If the manifest is unreadable or a case has no latent risk
    """
    directory = Path(directory)
    manifest = read_manifest(directory / "manifest.csv")
    try:
        latent = load_latent(directory).set_index("case_id")["latent_risk"]
    except (OSError, KeyError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise CohortError(f"Cannot read latent risks in {directory}: {e}") from e
    missing = [cid for cid in manifest.case_ids if cid not in latent.index]
    if missing:
        raise CohortError(f"{directory / 'latent.csv'}: no latent risk for cases {missing[:5]}")
    return oracle_c_index(
        latent.loc[manifest.case_ids].to_numpy(),
        [e.survival_months for e in manifest.entries],
        [e.event for e in manifest.entries],
    )
