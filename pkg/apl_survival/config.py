"""Run configuration files and the config-check rules engine.

A run config is a JSON object with the blocks ``apl``, ``train``, ``paths``
and ``workers``. Missing keys take their defaults; unknown keys are
rejected with file:line:column context.
"""

import json
import math
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError
from .fileio import save_text
from .models import (
    AblationConfig, AplConfig, Finding, RunConfig, RunPaths, Severity, TrainConfig,
)


class _Source:
    """Raw config text used to point errors at a line and column."""

    def __init__(self, path: str, text: str):
        self.path = path
        self.text = text

    def locate(self, key: str) -> str:
        offset = self.text.find(f'"{key}"')
        if offset < 0:
            return self.path
        line = self.text.count("\n", 0, offset) + 1
        column = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return f"{self.path}:{line}:{column}"


def _check_value(source: _Source, where: str, key: str, value: Any, default: Any) -> Any:
    def fail(expected: str):
        raise ConfigError(f"{source.locate(key)}: {where}.{key} must be {expected}, got {value!r}")

    if isinstance(default, bool):
        if not isinstance(value, bool):
            fail("a boolean")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        value = float(value)
    elif isinstance(default, tuple):
        if not isinstance(value, list) or len(value) != len(default) or \
                any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            fail(f"a list of {len(default)} numbers")
        value = tuple(float(v) for v in value)
    elif isinstance(default, list):
        if not isinstance(value, list):
            fail("a list")
    elif isinstance(default, str) or default is None:
        if value is not None and not isinstance(value, str):
            fail("a string")
    return value


def _build(cls, data: Any, where: str, source: _Source, nested: Optional[dict] = None):
    if not isinstance(data, dict):
        raise ConfigError(f"{source.locate(where.split('.')[-1])}: {where} must be an object")
    nested = nested or {}
    defaults = cls()
    names = {f.name for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{source.locate(key)}: unknown key {where}.{key}")
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            kwargs[key] = _build(nested[key], value, f"{where}.{key}", source)
        else:
            kwargs[key] = _check_value(source, where, key, value, getattr(defaults, key))
    return cls(**kwargs)


def apl_config_from_dict(data: dict, source: Optional[_Source] = None) -> AplConfig:
    source = source or _Source("<config>", json.dumps(data))
    return _build(AplConfig, data, "apl", source, {"ablation": AblationConfig})


def apl_config_to_dict(config: AplConfig) -> dict:
    return asdict(config)


def run_config_from_dict(data: Any, source: Optional[_Source] = None) -> RunConfig:
    source = source or _Source("<config>", json.dumps(data))
    if not isinstance(data, dict):
        raise ConfigError(f"{source.path}: top level must be a JSON object")
    allowed = {"apl", "train", "paths", "workers"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{source.locate(key)}: unknown top-level key {key!r}")
    workers = _check_value(source, "config", "workers", data.get("workers", 1), 1)
    return RunConfig(
        apl=apl_config_from_dict(data.get("apl", {}), source),
        train=_build(TrainConfig, data.get("train", {}), "train", source),
        paths=_build(RunPaths, data.get("paths", {}), "paths", source),
        workers=workers,
    )


def run_config_to_dict(config: RunConfig) -> dict:
    data = asdict(config)
    data["train"]["betas"] = list(config.train.betas)
    return data


def load_run_config(path: Path) -> RunConfig:
    """Read and schema-check a run config file.

    Relative paths inside ``paths`` are resolved against the config file's
    directory.

    Raises:
        ConfigError: On unreadable files, invalid JSON or schema violations
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e

    config = run_config_from_dict(data, _Source(str(path), text))
    if not config.paths.manifest:
        raise ConfigError(f"{path}: paths.manifest is required")

    base = path.parent
    for name in ("manifest", "expression", "pathways", "output_dir"):
        value = getattr(config.paths, name)
        if value and not Path(value).is_absolute():
            setattr(config.paths, name, str(base / value))
    return config


def save_run_config(path: Path, config: RunConfig) -> tuple[bool, str]:
    """Write a config as indented JSON; returns (success, path or error)."""
    return save_text(path, json.dumps(run_config_to_dict(config), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- check rules

class CheckContext:
    """What the rules see: the config and, when known, the cohort size."""

    def __init__(self, config: RunConfig, n_cases: Optional[int] = None):
        self.config = config
        self.n_cases = n_cases


RuleFunc = Callable[[CheckContext], Optional[Finding]]


def rule_self_attention_needs_prototypes(ctx: CheckContext) -> Optional[Finding]:
    """Self-attention fusion without any prototype branch is not a configuration we support."""
    ab = ctx.config.apl.ablation
    if not ab.use_self_attention or ab.use_hist_prototypes or ab.use_gene_prototypes:
        return None
    return Finding(
        id="ablation_dependency",
        severity=Severity.ERROR,
        title="Self-attention without prototypes",
        details="use_self_attention requires use_hist_prototypes or use_gene_prototypes.",
        field="apl.ablation",
    )


def rule_positive_dimensions(ctx: CheckContext) -> Optional[Finding]:
    apl = ctx.config.apl
    bad = [name for name in ("d_in", "d_model", "snn_hidden", "n_hist_queries",
                             "n_gene_queries", "n_bins", "patch_hidden")
           if getattr(apl, name) < 1]
    if not bad:
        return None
    return Finding(
        id="nonpositive_dimension",
        severity=Severity.ERROR,
        title="Non-positive model dimension",
        details=f"These sizes must be >= 1: {', '.join(bad)}.",
        field="apl",
    )


def rule_training_rates(ctx: CheckContext) -> Optional[Finding]:
    train = ctx.config.train
    problems = []
    if train.lr < 0:
        problems.append(f"lr={train.lr}")
    if train.weight_decay < 0:
        problems.append(f"weight_decay={train.weight_decay}")
    if train.epochs < 1:
        problems.append(f"epochs={train.epochs}")
    if train.batch_size < 1:
        problems.append(f"batch_size={train.batch_size}")
    if train.folds < 2:
        problems.append(f"folds={train.folds}")
    if train.eps <= 0:
        problems.append(f"eps={train.eps}")
    if not all(0.0 <= b < 1.0 for b in train.betas):
        problems.append(f"betas={train.betas}")
    if ctx.config.workers < 1:
        problems.append(f"workers={ctx.config.workers}")
    if not problems:
        return None
    return Finding(
        id="invalid_training_setting",
        severity=Severity.ERROR,
        title="Invalid training setting",
        details="Out of range: " + ", ".join(problems) + ".",
        field="train",
    )


def rule_dropout_range(ctx: CheckContext) -> Optional[Finding]:
    p = ctx.config.apl.snn_dropout
    if 0.0 <= p < 1.0:
        return None
    return Finding(
        id="dropout_range",
        severity=Severity.ERROR,
        title="Dropout probability out of range",
        details=f"snn_dropout must lie in [0, 1), got {p}.",
        field="apl.snn_dropout",
    )


def rule_censored_weight(ctx: CheckContext) -> Optional[Finding]:
    alpha = ctx.config.train.alpha
    if 0.0 <= alpha <= 1.0:
        return None
    return Finding(
        id="alpha_range",
        severity=Severity.ERROR,
        title="Censored-term weight out of range",
        details=f"train.alpha must lie in [0, 1], got {alpha}.",
        field="train.alpha",
    )


def rule_patch_encoder_kind(ctx: CheckContext) -> Optional[Finding]:
    kind = ctx.config.apl.patch_encoder
    if kind in ("linear", "mlp"):
        return None
    return Finding(
        id="patch_encoder_kind",
        severity=Severity.ERROR,
        title="Unknown patch encoder",
        details=f"apl.patch_encoder must be 'linear' or 'mlp', got {kind!r}.",
        field="apl.patch_encoder",
    )


def rule_batch_larger_than_split(ctx: CheckContext) -> Optional[Finding]:
    if ctx.n_cases is None:
        return None
    train = ctx.config.train
    n_train = ctx.n_cases - math.ceil(ctx.n_cases / max(train.folds, 1))
    if train.batch_size <= n_train:
        return None
    return Finding(
        id="batch_exceeds_split",
        severity=Severity.WARNING,
        title="Batch larger than training split",
        details=(
            f"batch_size={train.batch_size} but a training split holds about {n_train} cases; "
            "every epoch will take a single optimizer step."
        ),
        field="train.batch_size",
    )


def rule_residual_default(ctx: CheckContext) -> Optional[Finding]:
    apl = ctx.config.apl
    if not apl.residual or apl.ablation.use_self_attention:
        return None
    return Finding(
        id="residual_unused",
        severity=Severity.INFO,
        title="Residual flag has no effect",
        details="apl.residual only applies when self-attention fusion is enabled.",
        field="apl.residual",
    )


RULES: list[RuleFunc] = [
    rule_self_attention_needs_prototypes,
    rule_positive_dimensions,
    rule_training_rates,
    rule_dropout_range,
    rule_censored_weight,
    rule_patch_encoder_kind,
    rule_batch_larger_than_split,
    rule_residual_default,
]


def run_config_checks(config: RunConfig, n_cases: Optional[int] = None) -> list[Finding]:
    """Evaluate every rule; findings come back errors first."""
    ctx = CheckContext(config, n_cases)
    findings = [f for f in (rule(ctx) for rule in RULES) if f is not None]
    severity_order = {Severity.ERROR: 0, Severity.WARNING: 1, Severity.INFO: 2}
    findings.sort(key=lambda f: severity_order.get(f.severity, 99))
    return findings


def has_errors(findings: list[Finding]) -> bool:
    return any(f.severity == Severity.ERROR for f in findings)
