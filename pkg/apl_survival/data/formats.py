"""On-disk cohort formats.

- Patch embeddings: one ``.pemb`` file per case, a 16-byte little-endian
  header (magic ``PEMB``, version, n_patches, dim) followed by float32 rows.
- Expression matrix: CSV, first column ``gene_id``, one column per case.
- Pathways: ``name<TAB>gene1,gene2,...`` lines.
- Manifest: CSV ``case_id,embedding_path,survival_months,event``.
"""

from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import CohortError, EmbeddingFormatError
from ..fileio import atomic_write_bytes, atomic_write_text
from ..models import CohortManifest, ManifestEntry, PathwayDefinition

PEMB_MAGIC = b"PEMB"
PEMB_VERSION = 1
PEMB_HEADER = np.dtype([("magic", "S4"), ("version", "<u4"), ("n", "<u4"), ("dim", "<u4")])

MANIFEST_COLUMNS = ["case_id", "embedding_path", "survival_months", "event"]
DEFAULT_EXPRESSION_NAME = "expression.csv"
DEFAULT_PATHWAYS_NAME = "pathways.tsv"


def encode_embeddings(embeddings: np.ndarray) -> bytes:
    """Serialize an N x D matrix to the PEMB byte layout."""
    arr = np.asarray(embeddings)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise EmbeddingFormatError(f"Embeddings must be a non-empty 2-D matrix, got shape {arr.shape}")
    header = np.array([(PEMB_MAGIC, PEMB_VERSION, arr.shape[0], arr.shape[1])], dtype=PEMB_HEADER)
    return header.tobytes() + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_embeddings(raw: bytes, source: str = "<bytes>",
                      expected_dim: Optional[int] = None) -> np.ndarray:
    """Parse PEMB bytes into a float64 matrix.

    Raises:
        EmbeddingFormatError: On a bad magic, unknown version, zero patches,
            truncated payload or a dimension other than ``expected_dim``
    """
    if len(raw) < PEMB_HEADER.itemsize:
        raise EmbeddingFormatError(f"{source}: file too short for a PEMB header ({len(raw)} bytes)")
    header = np.frombuffer(raw[:PEMB_HEADER.itemsize], dtype=PEMB_HEADER)[0]
    if header["magic"] != PEMB_MAGIC:
        raise EmbeddingFormatError(f"{source}: bad magic {header['magic']!r}, expected {PEMB_MAGIC!r}")
    if int(header["version"]) != PEMB_VERSION:
        raise EmbeddingFormatError(f"{source}: unsupported PEMB version {int(header['version'])}")
    n, dim = int(header["n"]), int(header["dim"])
    if n < 1 or dim < 1:
        raise EmbeddingFormatError(f"{source}: header declares {n} patches of dimension {dim}")
    if expected_dim is not None and dim != expected_dim:
        raise EmbeddingFormatError(f"{source}: embedding dimension {dim} does not match expected {expected_dim}")
    payload = raw[PEMB_HEADER.itemsize:]
    if len(payload) != n * dim * 4:
        raise EmbeddingFormatError(
            f"{source}: payload holds {len(payload)} bytes, header requires {n * dim * 4}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float64)


def read_embeddings(path: Path, expected_dim: Optional[int] = None) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CohortError(f"Cannot read embedding file {path}: {e}") from e
    return decode_embeddings(raw, str(path), expected_dim)


def write_embeddings(path: Path, embeddings: np.ndarray) -> None:
    atomic_write_bytes(path, encode_embeddings(embeddings))


def read_manifest(path: Path, expression: Optional[Path] = None,
                  pathways: Optional[Path] = None) -> CohortManifest:
    """Parse a manifest CSV.

    Embedding paths are resolved relative to the manifest's directory. The
    expression matrix and pathway file default to ``expression.csv`` and
    ``pathways.tsv`` beside the manifest.

    Raises:
        CohortError: On missing columns, duplicate case ids, invalid labels or
            missing files
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"case_id": str, "embedding_path": str, "event": str},
                            float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise CohortError(f"Cannot read manifest {path}: {e}") from e

    missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
    if missing:
        raise CohortError(f"{path}: manifest is missing columns {missing}")
    if frame.empty:
        raise CohortError(f"{path}: manifest lists no cases")

    duplicated = frame["case_id"][frame["case_id"].duplicated()].tolist()
    if duplicated:
        raise CohortError(f"{path}: duplicate case ids {sorted(set(duplicated))}")

    base = path.parent
    entries = []
    for row_no, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            months = float(row.survival_months)
        except (TypeError, ValueError):
            months = float("nan")
        if not np.isfinite(months) or months < 0:
            raise CohortError(f"{path}:{row_no}: survival_months must be a nonnegative number, got {row.survival_months!r}")
        if str(row.event) not in ("0", "1", "0.0", "1.0", "True", "False"):
            raise CohortError(f"{path}:{row_no}: event must be 0 or 1, got {row.event!r}")
        event = str(row.event) in ("1", "1.0", "True")
        emb_path = base / str(row.embedding_path)
        if not emb_path.is_file():
            raise CohortError(f"{path}:{row_no}: embedding file {emb_path} does not exist")
        entries.append(ManifestEntry(str(row.case_id), emb_path, months, event))

    expression_path = Path(expression) if expression else base / DEFAULT_EXPRESSION_NAME
    pathway_path = Path(pathways) if pathways else base / DEFAULT_PATHWAYS_NAME
    for p in (expression_path, pathway_path):
        if not p.is_file():
            raise CohortError(f"Cohort file {p} does not exist")
    return CohortManifest(entries, expression_path, pathway_path)


def write_manifest(path: Path, rows: list[tuple[str, str, float, bool]]) -> None:
    frame = pd.DataFrame(
        [(case_id, emb, repr(float(months)), int(event)) for case_id, emb, months, event in rows],
        columns=MANIFEST_COLUMNS,
    )
    atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def read_expression(path: Path) -> pd.DataFrame:
    """Load the expression matrix as a float64 frame indexed by gene id."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise CohortError(f"Cannot read expression matrix {path}: {e}") from e
    if frame.shape[1] < 2:
        raise CohortError(f"{path}: expression matrix needs a gene_id column and at least one case column")
    frame = frame.set_index(frame.columns[0])
    frame.index = frame.index.astype(str)
    frame.columns = frame.columns.astype(str)
    duplicated = frame.index[frame.index.duplicated()].unique()
    if len(duplicated):
        raise CohortError(f"{path}: duplicate gene ids {', '.join(duplicated[:5])}")
    try:
        frame = frame.astype(np.float64)
    except ValueError as e:
        raise CohortError(f"{path}: expression values must be numeric: {e}") from e
    bad = ~np.isfinite(frame.to_numpy())
    if bad.any():
        rows, cols = np.nonzero(bad)
        raise CohortError(
            f"{path}: {int(bad.sum())} missing or non-finite values, first at gene "
            f"{frame.index[rows[0]]}, case {frame.columns[cols[0]]}"
        )
    return frame


def write_expression(path: Path, gene_ids: list[str], case_ids: list[str],
                     values: np.ndarray) -> None:
    """Write a genes x cases matrix; floats are written with round-trip precision."""
    frame = pd.DataFrame(values, index=pd.Index(gene_ids, name="gene_id"), columns=case_ids)
    atomic_write_text(path, frame.to_csv(float_format="%.17g", lineterminator="\n"))


def read_pathways(path: Path) -> list[PathwayDefinition]:
    """Parse ``name<TAB>gene,gene,...`` lines; blank lines are skipped.

    Raises:
        CohortError: On malformed lines, empty gene lists or duplicate names
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CohortError(f"Cannot read pathway file {path}: {e}") from e

    pathways: list[PathwayDefinition] = []
    seen: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        name, sep, genes = line.partition("\t")
        if not sep:
            raise CohortError(f"{path}:{line_no}: expected 'name<TAB>genes'")
        name = name.strip()
        gene_ids = tuple(g.strip() for g in genes.split(",") if g.strip())
        if not gene_ids:
            raise CohortError(f"{path}:{line_no}: pathway {name!r} lists no genes")
        if name in seen:
            raise CohortError(f"{path}:{line_no}: duplicate pathway name {name!r}")
        seen.add(name)
        pathways.append(PathwayDefinition(name, gene_ids))
    if not pathways:
        raise CohortError(f"{path}: no pathways defined")
    return pathways


def write_pathways(path: Path, pathways: list[PathwayDefinition]) -> None:
    lines = [f"{p.name}\t{','.join(p.gene_ids)}" for p in pathways]
    atomic_write_text(path, "\n".join(lines) + "\n")
