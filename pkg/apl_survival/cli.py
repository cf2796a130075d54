"""CLI command bodies for apl-survival.

Every command returns an exit code: 0 on success, 1 on a runtime failure,
2 on invalid arguments or configuration.
"""

import logging
import sys
from argparse import Namespace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config import has_errors, load_run_config, run_config_checks, save_run_config
from .data.cohort import ExpressionNormalizer, load_cohort
from .data.synthetic import (
    MALIGNANT_CLUSTER,
    SyntheticParams,
    generate_synthetic,
    load_patch_clusters,
    oracle_from_files,
)
from .errors import AplError, CohortError, ConfigError, GeneratorError
from .harness.ablation import run_ablation
from .harness.crossval import evaluate, run_cv
from .models import Cohort, Finding, FoldReport, RunConfig, Severity
from .network.apl import AplModel
from .network.checkpoint import load_checkpoint
from .network.interpret import export_interpretation, write_interpretation
from .survival.metrics import write_predictions

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# ANSI color codes
class Colors:
    RED = "\033[91m"
    GREEN = "\033[92m"
    YELLOW = "\033[93m"
    BLUE = "\033[94m"
    BOLD = "\033[1m"
    RESET = "\033[0m"


def print_colored(text: str, color: str = ""):
    """Print text with optional color."""
    if sys.stdout.isatty():
        print(f"{color}{text}{Colors.RESET}")
    else:
        print(text)


def run_cli(args: Namespace) -> int:
    """Dispatch a parsed command and map errors to exit codes."""
    commands: dict[str, Callable[[Namespace], int]] = {
        "synth-data": cli_synth_data,
        "train": cli_train,
        "eval": cli_eval,
        "ablate": cli_ablate,
        "export-attn": cli_export_attn,
        "check-config": cli_check_config,
    }
    try:
        return commands[args.command](args)
    except (ConfigError, GeneratorError) as e:
        print_colored(f"❌ {e}", Colors.RED)
        return EXIT_USAGE
    except (AplError, OSError) as e:
        print_colored(f"❌ {e}", Colors.RED)
        return EXIT_FAILURE


def print_findings(findings: list[Finding]) -> None:
    severity_colors = {
        Severity.ERROR: Colors.RED,
        Severity.WARNING: Colors.YELLOW,
        Severity.INFO: Colors.BLUE,
    }
    severity_icons = {
        Severity.ERROR: "❌",
        Severity.WARNING: "⚠️",
        Severity.INFO: "ℹ️",
    }
    for finding in findings:
        icon = severity_icons.get(finding.severity, "•")
        print_colored(f"{icon} [{finding.field}] {finding.title}", severity_colors.get(finding.severity, ""))
        print(f"   {finding.details}")


def _load_checked(config_path: str) -> tuple[RunConfig, Cohort, bool]:
    """Load a run config and its cohort, then run the config rules.

    Returns:
        Tuple of (config, cohort, ok) where ok is False if any rule reported an error
    """
    config = load_run_config(Path(config_path))
    cohort = load_cohort(
        config.paths.manifest,
        expression=Path(config.paths.expression) if config.paths.expression else None,
        pathways=Path(config.paths.pathways) if config.paths.pathways else None,
        expected_dim=config.apl.d_in,
    )
    findings = run_config_checks(config, len(cohort))
    print_findings(findings)
    return config, cohort, not has_errors(findings)


def _print_fold_report(report: FoldReport) -> None:
    print_colored(f"\n{report.label}", Colors.BOLD)
    for fold in report.folds:
        value = "undefined" if fold.c_index is None else f"{fold.c_index:.4f}"
        print(f"  fold {fold.fold}: C-index {value} ({fold.comparable_pairs} pairs, {fold.n_test} test cases)")
    color = Colors.GREEN if report.mean is not None else Colors.YELLOW
    print_colored(f"  mean ± std: {report.summary()}", color)


def cli_synth_data(args: Namespace) -> int:
    """Generate a synthetic cohort and print the latent-risk oracle C-index."""
    params = SyntheticParams(
        n_cases=args.cases,
        n_patches_range=(args.patches[0], args.patches[1]),
        d_in=args.dim,
        n_pathways=args.pathways,
        n_signal_pathways=args.signal_pathways,
        signal_strength=args.signal,
        censor_rate=args.censor_rate,
        seed=args.seed,
    )
    print_colored(f"Generating {params.n_cases} synthetic cases...", Colors.BLUE)
    cohort, manifest = generate_synthetic(Path(args.out), params, force=args.force)
    oracle = oracle_from_files(manifest.parent)
    print(f"Manifest: {manifest}")
    print(f"Events: {int(cohort.events.sum())}/{params.n_cases}")
    if oracle.c_index is None:
        print_colored("Oracle C-index: undefined (no comparable pairs)", Colors.YELLOW)
    else:
        print_colored(f"Oracle C-index: {oracle.c_index:.4f}", Colors.GREEN)
    return EXIT_OK


def _echo_config(config: RunConfig, out_dir: Path) -> None:
    ok, where = save_run_config(out_dir / "run.json", config)
    if not ok:
        log.warning("Could not save the resolved config: %s", where)


def cli_train(args: Namespace) -> int:
    config, cohort, ok = _load_checked(args.config)
    if not ok:
        return EXIT_USAGE
    if args.fold is not None and not 0 <= args.fold < config.train.folds:
        raise ConfigError(f"--fold {args.fold} out of range for {config.train.folds} folds")
    workers = args.workers if args.workers is not None else config.workers
    out_dir = Path(config.paths.output_dir)
    _echo_config(config, out_dir)
    print_colored(f"Training {config.train.folds}-fold cross-validation on {len(cohort)} cases...", Colors.BLUE)
    report = run_cv(cohort, config.apl, config.train, out_dir=out_dir, workers=workers,
                    only_fold=args.fold, progress=args.progress)
    _print_fold_report(report)
    print(f"\nReport written to {out_dir / 'report.json'}")
    return EXIT_OK


def _prepare_cases(model: AplModel, preprocessing: dict, cohort: Cohort) -> list:
    if cohort.pathway_sizes != model.config.pathway_sizes or \
            (model.config.pathway_names and cohort.pathway_names != model.config.pathway_names):
        raise CohortError("Cohort pathways do not match the pathways the checkpoint was trained on")
    if "normalizer" not in preprocessing:
        log.warning("Checkpoint has no normalization statistics; using raw expression")
        return list(cohort.cases)
    return ExpressionNormalizer.from_dict(preprocessing["normalizer"]).transform(cohort.cases)


def cli_eval(args: Namespace) -> int:
    """Score a cohort with a checkpoint's stored preprocessing."""
    model, preprocessing = load_checkpoint(Path(args.checkpoint))
    cohort = load_cohort(
        args.manifest,
        expression=Path(args.expression) if args.expression else None,
        pathways=Path(args.pathways) if args.pathways else None,
        expected_dim=model.config.d_in,
    )
    cases = _prepare_cases(model, preprocessing, cohort)
    report, risks = evaluate(model, cases)

    if report.c_index is None:
        print_colored("C-index: undefined (no comparable pairs)", Colors.YELLOW)
    else:
        print_colored(f"C-index: {report.c_index:.4f}", Colors.GREEN)
    print(f"Comparable pairs: {report.comparable_pairs}")
    print(f"Concordant: {report.concordant}, tied: {report.tied}")
    if args.predictions:
        write_predictions(Path(args.predictions), [c.case_id for c in cases], risks,
                          [c.survival_months for c in cases], [c.event for c in cases])
        print(f"Predictions written to {args.predictions}")
    return EXIT_OK


def _parse_cohort_args(values: list[str]) -> dict[str, str]:
    cohorts = {}
    for value in values:
        name, sep, path = value.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"--cohort expects NAME=MANIFEST, got {value!r}")
        if name in cohorts:
            raise ConfigError(f"--cohort {name} given twice")
        cohorts[name] = path
    return cohorts


def cli_ablate(args: Namespace) -> int:
    extra = _parse_cohort_args(args.cohort)
    config, cohort, ok = _load_checked(args.config)
    if not ok:
        return EXIT_USAGE
    name = Path(config.paths.manifest).resolve().parent.name or "cohort"
    if name in extra:
        raise ConfigError(f"--cohort {name} clashes with the config's cohort of the same name")
    cohorts = {name: cohort, **extra}
    workers = args.workers if args.workers is not None else config.workers
    out_dir = Path(config.paths.output_dir)
    _echo_config(config, out_dir)

    print_colored(f"Running ablation on {', '.join(cohorts)}...", Colors.BLUE)
    table = run_ablation(cohorts, config.apl, config.train, out_dir=out_dir, workers=workers)

    print_colored("\nAblation table", Colors.BOLD)
    print("  " + " | ".join(["Configuration"] + table.cohorts + ["Avg."]))
    for row, reports in table.rows:
        avg = table.average(row)
        cells = [reports[c].summary() for c in table.cohorts]
        print("  " + " | ".join([row.ablation.label] + cells + ["undefined" if avg is None else f"{avg:.3f}"]))
    print(f"\nTable written to {out_dir / 'ablation.csv'}")
    return EXIT_OK


def _planted_clusters(directory: Path, case) -> Optional[np.ndarray]:
    """Patch cluster labels of a synthetic case, when the cohort has them."""
    if not (directory / "patch_clusters.csv").is_file():
        return None
    labels = load_patch_clusters(directory).get(case.case_id)
    if labels is None or len(labels) != case.n_patches:
        log.warning("patch_clusters.csv does not describe case %s; skipping cluster labels", case.case_id)
        return None
    return labels


def cli_export_attn(args: Namespace) -> int:
    """Write per-prototype attention CSVs for one case."""
    if args.top_k < 1 or args.top_k_pathways < 1:
        raise ConfigError("--top-k and --top-k-pathways must be >= 1")
    model, preprocessing = load_checkpoint(Path(args.checkpoint))
    cohort = load_cohort(args.manifest, expected_dim=model.config.d_in)
    try:
        raw_case = cohort.find(args.case)
    except KeyError:
        raise CohortError(f"Case {args.case} is not in {args.manifest}") from None
    case = _prepare_cases(model, preprocessing, Cohort([raw_case], cohort.pathways))[0]

    report = export_interpretation(model, case, top_k_patches=args.top_k, top_k_pathways=args.top_k_pathways,
                                   n_prototypes=args.prototypes, seed=args.seed)
    written = write_interpretation(report, Path(args.out))

    labels = _planted_clusters(Path(args.manifest).parent, case)
    for proto in report.histology:
        line = f"  histology prototype {proto.prototype}: patches {proto.top_indices}"
        if labels is not None:
            share = float(np.mean(labels[proto.top_indices] == MALIGNANT_CLUSTER))
            line += f" (clusters {labels[proto.top_indices].tolist()}, planted share {share:.2f})"
        print(line)
    for proto in report.genomic:
        print(f"  genomic prototype {proto.prototype}: {', '.join(proto.top_labels)}")
    print_colored(f"✅ Wrote {len(written)} files to {args.out}", Colors.GREEN)
    return EXIT_OK


def cli_check_config(args: Namespace) -> int:
    config = load_run_config(Path(args.config))
    findings = run_config_checks(config)
    if not findings:
        print_colored("✅ No issues found", Colors.GREEN)
        return EXIT_OK
    print_findings(findings)
    return EXIT_USAGE if has_errors(findings) else EXIT_OK
