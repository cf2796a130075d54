"""Cohort ingest, survival discretization, folds and synthetic cohorts."""

from .cohort import ExpressionNormalizer, load_cohort, resolve_pathways
from .discretize import TimeBins, discretize_survival
from .folds import make_folds
from .formats import (
    decode_embeddings,
    encode_embeddings,
    read_embeddings,
    read_expression,
    read_manifest,
    read_pathways,
    write_embeddings,
)
from .synthetic import (
    SyntheticCohort,
    SyntheticParams,
    generate_synthetic,
    load_patch_clusters,
    oracle_c_index,
    oracle_from_files,
    simulate_cohort,
)

__all__ = [
    "ExpressionNormalizer",
    "SyntheticCohort",
    "SyntheticParams",
    "TimeBins",
    "decode_embeddings",
    "discretize_survival",
    "encode_embeddings",
    "generate_synthetic",
    "load_cohort",
    "load_patch_clusters",
    "make_folds",
    "oracle_c_index",
    "oracle_from_files",
    "read_embeddings",
    "read_expression",
    "read_manifest",
    "read_pathways",
    "resolve_pathways",
    "simulate_cohort",
    "write_embeddings",
]
