"""Experiment report generation for apl-survival."""

from .generator import (
    ablation_table_csv,
    fold_report_csv,
    fold_report_to_dict,
    generate_ablation_report,
    generate_experiment_report,
    write_fold_report,
)

__all__ = [
    "ablation_table_csv",
    "fold_report_csv",
    "fold_report_to_dict",
    "generate_ablation_report",
    "generate_experiment_report",
    "write_fold_report",
]
