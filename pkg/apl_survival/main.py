"""Main entry point for apl-survival."""

import argparse
import logging
import sys
from typing import Optional

from . import __version__

LOG_FORMAT = "[%(asctime)s] %(levelname)s - %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apl-survival",
        description="Adaptive prototype learning for multimodal survival prediction",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="warning",
        choices=["debug", "info", "warning", "error"],
        help="Logging verbosity (default: warning)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth-data", help="Generate a synthetic planted-signal cohort")
    synth.add_argument("--out", required=True, help="Output directory")
    synth.add_argument("--cases", type=int, default=200, help="Number of cases (default: 200)")
    synth.add_argument("--signal", type=float, default=2.0, help="Signal strength (default: 2.0)")
    synth.add_argument("--censor-rate", type=float, default=0.3, help="Censoring probability (default: 0.3)")
    synth.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    synth.add_argument("--dim", type=int, default=32, help="Patch embedding dimension (default: 32)")
    synth.add_argument("--pathways", type=int, default=8, help="Number of pathways (default: 8)")
    synth.add_argument("--signal-pathways", type=int, default=2,
                       help="Pathways carrying the genomic signal (default: 2)")
    synth.add_argument("--patches", type=int, nargs=2, default=[20, 60], metavar=("MIN", "MAX"),
                       help="Patches per case range (default: 20 60)")
    synth.add_argument("--force", action="store_true", help="Overwrite a non-empty output directory")

    train = sub.add_parser("train", help="Cross-validate a model from a run config")
    train.add_argument("--config", required=True, help="Run config JSON file")
    train.add_argument("--fold", type=int, default=None, help="Train only this fold")
    train.add_argument("--workers", type=int, default=None, help="Parallel fold workers (overrides config)")
    train.add_argument("--progress", action="store_true", help="Show a progress bar over epochs")

    evaluate = sub.add_parser("eval", help="Score a cohort with a checkpoint")
    evaluate.add_argument("--checkpoint", required=True, help="Checkpoint file")
    evaluate.add_argument("--manifest", required=True, help="Cohort manifest CSV")
    evaluate.add_argument("--expression", default=None, help="Expression matrix (default: beside manifest)")
    evaluate.add_argument("--pathways", default=None, help="Pathway file (default: beside manifest)")
    evaluate.add_argument("--predictions", default=None, help="Write per-case risks to this CSV")

    ablate = sub.add_parser("ablate", help="Run the four-configuration ablation")
    ablate.add_argument("--config", required=True, help="Run config JSON file")
    ablate.add_argument("--cohort", action="append", default=[], metavar="NAME=MANIFEST",
                        help="Additional cohort (repeatable)")
    ablate.add_argument("--workers", type=int, default=None, help="Parallel fold workers (overrides config)")

    export = sub.add_parser("export-attn", help="Export prototype attention maps for one case")
    export.add_argument("--checkpoint", required=True, help="Checkpoint file")
    export.add_argument("--manifest", required=True, help="Manifest containing the case")
    export.add_argument("--case", required=True, help="Case id")
    export.add_argument("--out", required=True, help="Output directory for the CSVs")
    export.add_argument("--top-k", type=int, default=3, help="Patches per histology prototype (default: 3)")
    export.add_argument("--top-k-pathways", type=int, default=6,
                        help="Pathways per genomic prototype (default: 6)")
    export.add_argument("--prototypes", type=int, default=None,
                        help="Export a random subset of this many prototypes per modality")
    export.add_argument("--seed", type=int, default=0, help="Seed for the prototype subset (default: 0)")

    check = sub.add_parser("check-config", help="Validate a run config and list findings")
    check.add_argument("--config", required=True, help="Run config JSON file")

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Parse arguments, configure logging and dispatch the command."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()), format=LOG_FORMAT)

    from .cli import run_cli
    return run_cli(args)


if __name__ == "__main__":
    sys.exit(main())
