"""Shared builders for tests."""

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from apl_survival.data.synthetic import SyntheticParams, simulate_cohort
from apl_survival.models import AblationConfig, AplConfig, CaseRecord, Cohort, TrainConfig


def tiny_config(**overrides) -> AplConfig:
    """A model small enough to gradient-check every coordinate."""
    config = AplConfig(
        d_in=6,
        d_model=8,
        snn_hidden=8,
        n_hist_queries=2,
        n_gene_queries=2,
        n_bins=4,
        patch_hidden=8,
        init_std=0.3,
        pathway_sizes=[3, 4],
        pathway_names=["PATHWAY_A", "PATHWAY_B"],
    )
    return replace(config, **overrides)


def make_case(
    rng: np.random.Generator,
    case_id: str = "case_0000",
    n_patches: int = 3,
    d_in: int = 6,
    pathway_sizes: Sequence[int] = (3, 4),
    months: float = 10.0,
    event: bool = True,
    bin: Optional[int] = None,
) -> CaseRecord:
    return CaseRecord(
        case_id=case_id,
        patch_embeddings=rng.normal(size=(n_patches, d_in)),
        pathway_inputs=[rng.normal(size=g) for g in pathway_sizes],
        survival_months=months,
        event=event,
        bin=bin,
    )


def small_params(**overrides) -> SyntheticParams:
    params = SyntheticParams(
        n_cases=40,
        n_patches_range=(3, 6),
        d_in=6,
        n_pathways=3,
        genes_per_pathway=(2, 4),
        n_signal_pathways=1,
        seed=0,
    )
    return replace(params, **overrides)


def small_cohort(**overrides) -> Cohort:
    """An in-memory synthetic cohort matching ``small_params``."""
    return simulate_cohort(small_params(**overrides)).to_cohort()


def small_apl(d_in: int = 6, ablation: Optional[AblationConfig] = None, **overrides) -> AplConfig:
    """A fast architecture for end-to-end runs; the pathway layout comes from the cohort."""
    config = AplConfig(
        d_in=d_in,
        d_model=8,
        snn_hidden=8,
        n_hist_queries=4,
        n_gene_queries=2,
        n_bins=4,
        ablation=ablation or AblationConfig(),
    )
    return replace(config, **overrides)


def fast_train(**overrides) -> TrainConfig:
    return replace(TrainConfig(epochs=2, batch_size=8, folds=3, seed=0), **overrides)


def scaled_down_apl(d_in: int = 32, **overrides) -> AplConfig:
    """The desk-scale configuration of the end-to-end recovery runs."""
    config = AplConfig(d_in=d_in, d_model=64, snn_hidden=64, n_hist_queries=16, n_gene_queries=8,
                       patch_hidden=64)
    return replace(config, **overrides)
