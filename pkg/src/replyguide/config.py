"""Run configuration: one JSON file describes a whole experiment."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any

from .classifiers import TrainConfig
from .decoding import METHODS, GuidanceConfig
from .smartreply import RetrieverConfig
from .synthetic import SyntheticSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Paths:
    data: str = "data"
    artifacts: str = "artifacts"
    reports: str = "reports"


@dataclass(frozen=True)
class LMConfig:
    order: int = 4
    discount: float = 0.75


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    min_count: int = 1
    lm: LMConfig = field(default_factory=LMConfig)
    classifier: TrainConfig = field(default_factory=TrainConfig)
    retriever: RetrieverConfig = field(default_factory=RetrieverConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    methods: tuple[str, ...] = METHODS
    alphas: tuple[float, ...] = (0.5, 1.0, 2.0)
    bootstrap_resamples: int = 10000
    seed: int = 0

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods: {', '.join(unknown)}")
        if not self.methods:
            raise ConfigError("methods must be non-empty")

    def seeded(self) -> RunConfig:
        """Copy with every component seed derived from the global seed."""
        s = self.seed
        return replace(
            self,
            synthetic=replace(self.synthetic, seed=s),
            classifier=replace(self.classifier, seed=s),
            retriever=replace(self.retriever, seed=s),
        )

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    extra = sorted(set(data) - set(known))
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        elif isinstance(current, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{where}.{name}: expected a list")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "config")


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def with_overrides(config: RunConfig, **updates) -> RunConfig:
    """Apply dotted-key overrides, e.g. ``{"guidance.alpha": 2.0}``; None values are skipped."""
    data = config.to_dict()
    for key, value in updates.items():
        if value is None:
            continue
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            if not isinstance(node.get(p), dict):
                raise ConfigError(f"unknown config key {key}")
            node = node[p]
        if leaf not in node:
            raise ConfigError(f"unknown config key {key}")
        node[leaf] = list(value) if isinstance(value, tuple) else value
    return config_from_dict(data)
