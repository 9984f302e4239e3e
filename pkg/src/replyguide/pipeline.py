"""End-to-end wiring: data -> generator, retriever, classifiers -> D' -> report.

Every model is trained on the full training split; the filtered split only
feeds evaluation (and the rejected ids label the action classifier).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .classifiers import (
    load_classifier,
    train_action_classifier,
    train_eval_intent_classifier,
    train_intent_prefix_classifier,
)
from .config import RunConfig
from .corpus import Dataset, load_splits, write_records
from .evaluation import EvalReport, MissingArtifact, Models, SweepTable, run_experiment, sweep_alpha
from .lm import load_ngram, train_ngram
from .simulator import FilterReport, build_filtered_dataset
from .smartreply import build_reply_index, load_retriever, train_dual_encoder
from .synthetic import generate_synthetic, synthetic_records

ARTIFACTS = {
    "lm": "generator.json",
    "retriever": "retriever.zip",
    "intent_classifier": "intent_classifier.zip",
    "action_classifier": "action_classifier.zip",
    "eval_classifier": "eval_classifier.zip",
    "rejected_ids": "rejected_ids.json",
}


def synthetic_splits(config: RunConfig) -> tuple[Dataset, Dataset, Dataset]:
    return generate_synthetic(config.seeded().synthetic)


def write_synthetic(config: RunConfig, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for split, records in synthetic_records(config.seeded().synthetic).items():
        path = directory / f"{split}.jsonl"
        write_records(path, records)
        paths.append(path)
    return paths


def train_retriever(config: RunConfig, train: Dataset):
    encoder = train_dual_encoder(train, config.seeded().retriever)
    return encoder, build_reply_index(encoder, train)


def train_guidance_classifiers(config: RunConfig, train: Dataset, rejected_ids):
    cfg = config.seeded()
    intent = train_intent_prefix_classifier(train, cfg.classifier)
    action = train_action_classifier(train, rejected_ids, cfg.classifier)
    # a different shuffle seed keeps the metric classifier independent of guidance
    evaluator = train_eval_intent_classifier(train, cfg.classifier, seed=cfg.seed + 1)
    return intent, action, evaluator


def filter_split(config: RunConfig, data: Dataset, encoder, index):
    r = config.retriever
    return build_filtered_dataset(data, encoder, index, r.k, r.dedupe_intents)


@dataclass
class PipelineResult:
    report: EvalReport
    traces: list[dict]
    filter_report: FilterReport
    test_filtered: Dataset
    models: Models
    rejected_ids: set[str]


def run_pipeline(config: RunConfig, splits=None) -> PipelineResult:
    """Train everything in memory and evaluate on the filtered test split."""
    cfg = config.seeded()
    train, _, test = splits if splits is not None else synthetic_splits(cfg)
    lm = train_ngram(train, cfg.lm.order, cfg.lm.discount)
    encoder, index = train_retriever(cfg, train)
    _, rejected, train_report = filter_split(cfg, train, encoder, index)
    test_f, _, test_report = filter_split(cfg, test, encoder, index)
    intent, action, evaluator = train_guidance_classifiers(cfg, train, rejected)
    models = Models(lm, encoder, index, intent, action, evaluator)
    report, traces = evaluate(cfg, test_f, models)
    return PipelineResult(report, traces, train_report.merged(test_report), test_f, models, rejected)


def evaluate(config: RunConfig, test_filtered: Dataset, models: Models):
    cfg = config.seeded()
    return run_experiment(
        test_filtered, models, cfg.methods, cfg.guidance,
        seed=cfg.seed, resamples=cfg.bootstrap_resamples,
        K=cfg.retriever.k, dedupe_intents=cfg.retriever.dedupe_intents,
        config_echo=cfg.to_dict(),
    )


def run_sweep(config: RunConfig, test_filtered: Dataset, models: Models) -> SweepTable:
    cfg = config.seeded()
    return sweep_alpha(
        test_filtered, models, cfg.guidance, cfg.alphas,
        seed=cfg.seed, resamples=cfg.bootstrap_resamples,
        K=cfg.retriever.k, dedupe_intents=cfg.retriever.dedupe_intents,
    )


# -- artifacts on disk -------------------------------------------------------

def artifact_path(directory: str | Path, name: str) -> Path:
    return Path(directory) / ARTIFACTS[name]


def load_models(directory: str | Path, names) -> Models:
    models = Models()
    for name in names:
        key = "retriever" if name in ("encoder", "index") else name
        path = artifact_path(directory, key)
        if not path.exists():
            raise MissingArtifact(f"missing artifact: {path}")
        if key == "lm":
            models.lm = load_ngram(path)
        elif key == "retriever":
            models.encoder, models.index = load_retriever(path)
        else:
            setattr(models, key, load_classifier(path))
    return models


def load_rejected_ids(directory: str | Path) -> set[str]:
    path = artifact_path(directory, "rejected_ids")
    if not path.exists():
        raise MissingArtifact(f"missing artifact: {path} (run the filter command first)")
    return set(json.loads(path.read_text(encoding="utf-8")))


def save_rejected_ids(directory: str | Path, ids) -> Path:
    path = artifact_path(directory, "rejected_ids")
    path.write_text(json.dumps(sorted(ids), indent=0) + "\n", encoding="utf-8")
    return path


def load_data(config: RunConfig) -> tuple[Dataset, Dataset, Dataset]:
    return load_splits(config.paths.data, config.min_count)

