"""Experiment report generator for apl-survival.

A cross-validation run is written three ways: ``report.json`` (canonical
JSON), ``report.csv`` (one row per fold plus mean/std rows) and a markdown
``report.md`` for people. JSON and CSV hold nothing time-dependent, so two
runs with the same seed produce identical bytes.
"""

from dataclasses import asdict
from datetime import datetime
from pathlib import Path
from typing import Optional

import pandas as pd

from ..fileio import atomic_write_json, atomic_write_text, canonical_json
from ..models import AblationTable, FoldReport, FoldResult

FOLD_COLUMNS = [
    "fold", "c_index", "comparable_pairs", "n_train", "n_test", "n_test_events",
    "final_train_loss", "checkpoint",
]


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "undefined" if value is None else f"{value:.{digits}f}"


def fold_report_to_dict(report: FoldReport) -> dict:
    """Deterministic part of a FoldReport (no wall time)."""
    return {
        "label": report.label,
        "folds": [asdict(f) for f in report.folds],
        "mean": report.mean,
        "std": report.std,
        "config": report.config,
    }



def fold_report_csv(report: FoldReport) -> str:
    rows = [[getattr(f, c) for c in FOLD_COLUMNS] for f in report.folds]
    rows.append(["mean", report.mean] + [None] * (len(FOLD_COLUMNS) - 2))
    rows.append(["std", report.std] + [None] * (len(FOLD_COLUMNS) - 2))
    frame = pd.DataFrame(rows, columns=FOLD_COLUMNS)
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def write_fold_report(report: FoldReport, out_dir: Path) -> list[Path]:
    """Write report.json, report.csv, timing.json and report.md into ``out_dir``.

    Returns:
        Paths written, in that order
    """
    out_dir = Path(out_dir)
    paths = [out_dir / "report.json", out_dir / "report.csv", out_dir / "timing.json", out_dir / "report.md"]
    atomic_write_json(paths[0], fold_report_to_dict(report))
    atomic_write_text(paths[1], fold_report_csv(report))
    atomic_write_json(paths[2], {"wall_time_s": report.wall_time_s})
    atomic_write_text(paths[3], generate_experiment_report(report))
    return paths


def generate_experiment_report(report: FoldReport, timestamp: Optional[str] = None) -> str:
    """Generate a markdown report for one cross-validation run.

    Args:
        report: Finished cross-validation report
        timestamp: Override for the header time (default: now)

    Returns:
        Markdown report string
    """
    timestamp = timestamp or datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    sections = [
        _header_section(f"Cross-validation: {report.label}", timestamp),
        _summary_section(report),
        _folds_section(report.folds),
        _bins_section(report.folds),
        _config_section(report.config),
        _footer_section(),
    ]
    return "\n\n".join(sections)


def generate_ablation_report(table: AblationTable, timestamp: Optional[str] = None) -> str:
    """Generate a markdown report with the ablation table and its per-cell fold details."""
    timestamp = timestamp or datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    sections = [
        _header_section("Ablation study", timestamp),
        _ablation_section(table),
    ]
    for row, reports in table.rows:
        for cohort in table.cohorts:
            sections.append(f"### {row.ablation.label} on {cohort}\n\n" + _fold_table(reports[cohort].folds))
    sections.append(_footer_section())
    return "\n\n".join(sections)


def _header_section(title: str, timestamp: str) -> str:
    return f"""# 🧬 {title}

**Generated:** {timestamp}
**Metric:** test concordance index (Harrell's C) per fold, final-epoch weights

---"""


def _summary_section(report: FoldReport) -> str:
    defined = [f for f in report.folds if f.c_index is not None]
    if report.mean is None:
        status = "> ⚠️ **No fold produced a defined C-index**"
    elif len(defined) < len(report.folds):
        status = f"> ⚠️ **{len(report.folds) - len(defined)} fold(s) undefined**, excluded from the mean"
    else:
        status = f"> ✅ **C-index {report.summary()}**"

    lines = [
        "## 📊 Summary",
        "",
        status,
        "",
        "| Metric | Value |",
        "|--------|-------|",
        f"| Folds | {len(report.folds)} |",
        f"| Mean C-index | {_fmt(report.mean)} |",
        f"| Std C-index | {_fmt(report.std)} |",
        f"| Wall time | {report.wall_time_s:.1f} s |",
    ]
    return "\n".join(lines)


def _fold_table(folds: list[FoldResult]) -> str:
    lines = [
        "| Fold | C-index | Pairs | Train | Test | Test events | Final train loss |",
        "|------|---------|-------|-------|------|-------------|------------------|",
    ]
    for f in folds:
        lines.append(
            f"| {f.fold} | {_fmt(f.c_index)} | {f.comparable_pairs} | {f.n_train} | "
            f"{f.n_test} | {f.n_test_events} | {f.final_train_loss:.4f} |"
        )
    return "\n".join(lines)


def _folds_section(folds: list[FoldResult]) -> str:
    return "## 📁 Folds\n\n" + _fold_table(folds)


def _bins_section(folds: list[FoldResult]) -> str:
    lines = [
        "## ⏱️ Survival Bin Edges",
        "",
        "Interior edges in months, fitted on each training split.",
        "",
    ]
    for f in folds:
        edges = ", ".join(f"{e:.2f}" for e in f.bin_edges) or "(single bin)"
        lines.append(f"- Fold {f.fold}: {edges}")
    return "\n".join(lines)


def _config_section(config: dict) -> str:
    return "\n".join([
        "## ⚙️ Configuration",
        "",
        "<details>",
        "<summary>Click to expand the run configuration</summary>",
        "",
        "```json",
        canonical_json(config),
        "```",
        "",
        "</details>",
    ])


def _ablation_section(table: AblationTable) -> str:
    header = "| Configuration | " + " | ".join(table.cohorts) + " | Avg. |"
    rule = "|---" * (len(table.cohorts) + 2) + "|"
    lines = ["## 🧪 Ablation Table", "", header, rule]
    for row, reports in table.rows:
        cells = [reports[c].summary() for c in table.cohorts]
        lines.append(f"| {row.ablation.label} | " + " | ".join(cells) + f" | {_fmt(table.average(row), 3)} |")
    return "\n".join(lines)


def ablation_table_csv(table: AblationTable) -> str:
    """One row per configuration with mean and std per cohort, plus the average of means."""
    records = []
    for row, reports in table.rows:
        record = {"configuration": row.value, "label": row.ablation.label}
        for cohort in table.cohorts:
            record[f"{cohort}_mean"] = reports[cohort].mean
            record[f"{cohort}_std"] = reports[cohort].std
        record["avg"] = table.average(row)
        records.append(record)
    return pd.DataFrame(records).to_csv(index=False, float_format="%.17g", lineterminator="\n")


def _footer_section() -> str:
    return "---\n\n*Report generated by apl-survival*"
