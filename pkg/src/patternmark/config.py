"""Experiment configuration and stable seed derivation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .errors import InvalidArgument
from .pattern import parse_key


def derive_seed(master: int, label: str) -> int:
    """64-bit seed for a named stage, stable across runs and platforms."""
    digest = hashlib.blake2b(f"{int(master)}/{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class PartitionBlock:
    vocab_size: int = 1000
    key: int = 0x5EED


@dataclass
class ModelBlock:
    kind: str = "random"
    logit_scale: float = 0.07
    order: int = 1
    context_window: int = 3


@dataclass
class GenerationBlock:
    delta: float = 5.8
    hard: bool = False
    length: int = 64
    sampling: str = "multinomial"
    temperature: float = 1.0
    top_p: float = 1.0
    prompt_length: int = 4
    num_texts: int = 1000
    num_calibration: int = 1000


@dataclass
class EditBlock:
    kinds: list[str] = field(default_factory=lambda: ["insert", "replace", "delete"])
    span_min: int = 1
    span_max: int = 6
    num_edits: int = 1


@dataclass
class DetectionBlock:
    window: int = 2
    tau_d: float | None = None
    tau_e: float | None = None
    partial: bool = False
    fast: bool = True


@dataclass
class EvaluationBlock:
    tolerance: int = 3
    target_alpha: float = 0.1
    # tolerance used when calibrating tau_e; defaults to ``tolerance``
    calibration_tolerance: int | None = None


@dataclass
class SweepBlock:
    deltas: list[float] = field(default_factory=lambda: [3.0, 4.5, 5.8, 7.0])
    num_texts: int = 1000


@dataclass
class OutputBlock:
    dir: str = "runs/default"
    traces: int = 0


@dataclass
class ExperimentConfig:
    seed: int = 0
    pattern: str = "AB"
    partition: PartitionBlock = field(default_factory=PartitionBlock)
    model: ModelBlock = field(default_factory=ModelBlock)
    generation: GenerationBlock = field(default_factory=GenerationBlock)
    edit: EditBlock = field(default_factory=EditBlock)
    detection: DetectionBlock = field(default_factory=DetectionBlock)
    evaluation: EvaluationBlock = field(default_factory=EvaluationBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(cls, data or {}, "config")


def _build(klass, data: dict, where: str):
    if not isinstance(data, dict):
        raise InvalidArgument(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(klass)}
    unknown = set(data) - set(known)
    if unknown:
        raise InvalidArgument(f"{where}: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    defaults = klass()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    cfg = klass(**kwargs)
    if klass is PartitionBlock:
        cfg.key = parse_key(cfg.key)
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a YAML or JSON config; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from None
    return ExperimentConfig.from_dict(data or {})


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
