"""Dataset schema, tokenization, intent labels and JSON-lines ingestion."""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD, UNK, BOS, EOS, SEP = 0, 1, 2, 3, 4
RESERVED = ("<pad>", "<unk>", "<s>", "</s>", "<sep>")
SPLITS = ("train", "valid", "test")

_TOKEN_RE = re.compile(r"[^\s.,!?;:]+|[.,!?;:]")


class DataError(ValueError):
    """Malformed input data or an inconsistent dataset."""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.tokens[: len(RESERVED)]) != RESERVED:
            raise DataError("vocab must start with the reserved tokens")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise DataError("duplicate tokens in vocab")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._index.get(token, UNK)

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        return tuple(self._index.get(t, UNK) for t in tokens)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def build_vocab(texts: Iterable[Sequence[str]], min_count: int = 1) -> Vocab:
    """Build a vocab from tokenized texts.

    Tokens are ordered by descending frequency, ties broken lexicographically,
    so ids are a pure function of the corpus.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for toks in texts:
        counts.update(toks)
    if not counts:
        raise DataError("empty corpus")
    reserved = set(RESERVED)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count and t not in reserved),
        key=lambda t: (-counts[t], t),
    )
    return Vocab(RESERVED + tuple(kept))


def composite_intent(atomics: Iterable[str]) -> str:
    parts = {a.strip().lower() for a in atomics}
    if not parts:
        raise ValueError("composite intent needs at least one atomic intent")
    if "" in parts:
        raise ValueError("empty atomic intent name")
    return "+".join(sorted(parts))


def intent_parts(label: str) -> list[str]:
    return label.split("+")


@dataclass(frozen=True)
class IntentCatalog:
    labels: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DataError("intent catalog needs at least 2 labels")
        index = {lab: i for i, lab in enumerate(self.labels)}
        if len(index) != len(self.labels):
            raise DataError("duplicate intent labels")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> IntentCatalog:
        return cls(tuple(sorted(set(labels))))

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        return self._index[label]


@dataclass(frozen=True)
class Example:
    id: str
    message: tuple[int, ...]
    reply: tuple[int, ...]
    intent: str


@dataclass(frozen=True)
class Dataset:
    examples: tuple[Example, ...]
    vocab: Vocab
    catalog: IntentCatalog
    split: str = "train"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DataError(f"unknown split {self.split!r}")
        V = len(self.vocab)
        for ex in self.examples:
            if not ex.message or not ex.reply:
                raise DataError(f"example {ex.id}: empty message or reply")
            if max(ex.message) >= V or max(ex.reply) >= V:
                raise DataError(f"example {ex.id}: token id out of range")
            if ex.intent not in self.catalog:
                raise DataError(f"example {ex.id}: intent {ex.intent!r} not in catalog")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    def subset(self, keep_ids: Iterable[str]) -> Dataset:
        keep = set(keep_ids)
        return Dataset(
            tuple(ex for ex in self.examples if ex.id in keep),
            self.vocab, self.catalog, self.split, dict(self.meta),
        )


# -- JSON-lines ingestion ----------------------------------------------------

_FIELDS = ("id", "message", "reply", "intents")


def read_records(path: str | Path) -> list[dict]:
    """Parse a dataset file, validating the schema line by line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataError(f"line {lineno}: invalid JSON ({err.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"line {lineno}: expected an object")
            for name in _FIELDS:
                if name not in obj:
                    raise DataError(f"line {lineno}: missing field {name}")
            intents = obj["intents"]
            if not isinstance(intents, list) or not intents or not all(
                isinstance(i, str) and i.strip() for i in intents
            ):
                raise DataError(f"line {lineno}: intents must be a non-empty list of strings")
            records.append({**obj, "_line": lineno})
    return records


def write_records(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            row = {k: rec[k] for k in _FIELDS}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def records_to_dataset(
    records: Sequence[dict], vocab: Vocab, catalog: IntentCatalog, split: str
) -> Dataset:
    examples = []
    skipped = 0
    for rec in records:
        msg = vocab.encode(tokenize(rec["message"]))
        rep = vocab.encode(tokenize(rec["reply"]))
        if not msg or not rep:
            skipped += 1
            continue
        label = composite_intent(rec["intents"])
        if label not in catalog:
            where = f"line {rec['_line']}: " if "_line" in rec else ""
            raise DataError(f"{where}intent {label!r} not in catalog")
        examples.append(Example(str(rec["id"]), msg, rep, label))
    return Dataset(tuple(examples), vocab, catalog, split, {"skipped_empty": skipped})


def _vocab_from_records(records: Sequence[dict], min_count: int) -> Vocab:
    texts = []
    for rec in records:
        texts.append(tokenize(rec["message"]))
        texts.append(tokenize(rec["reply"]))
    return build_vocab(texts, min_count)


def load_dataset(
    path: str | Path,
    catalog: IntentCatalog | None = None,
    vocab: Vocab | None = None,
    split: str = "train",
    min_count: int = 1,
) -> Dataset:
    """Load one JSON-lines split.

    Without a vocab the file is treated as the training split and the vocab is
    built from it; without a catalog one is built from the file's labels.
    """
    records = read_records(path)
    if vocab is None:
        vocab = _vocab_from_records(records, min_count)
    if catalog is None:
        catalog = IntentCatalog.from_labels(composite_intent(r["intents"]) for r in records)
    return records_to_dataset(records, vocab, catalog, split)


def datasets_from_records(
    splits: dict[str, Sequence[dict]], min_count: int = 1
) -> tuple[Dataset, Dataset, Dataset]:
    """Vocab from train only; catalog from the union of labels over all splits."""
    vocab = _vocab_from_records(splits["train"], min_count)
    catalog = IntentCatalog.from_labels(
        composite_intent(r["intents"]) for recs in splits.values() for r in recs
    )
    train, valid, test = (
        records_to_dataset(splits[s], vocab, catalog, s) for s in SPLITS
    )
    return train, valid, test


def load_splits(directory: str | Path, min_count: int = 1) -> tuple[Dataset, Dataset, Dataset]:
    directory = Path(directory)
    splits = {}
    for s in SPLITS:
        path = directory / f"{s}.jsonl"
        if not path.exists():
            raise FileNotFoundError(f"missing data file {path}")
        splits[s] = read_records(path)
    return datasets_from_records(splits, min_count)


def split_indices(n: int, ratios: Sequence[float], seed: int) -> list[list[int]]:
    """Seeded partition of range(n) into train/valid/test index lists (each sorted)."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative fractions summing to 1, got {ratios}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(n, round(ratios[0] * n))
    n_valid = min(n - n_train, round(ratios[1] * n))
    bounds = [0, n_train, n_train + n_valid, n]
    return [sorted(int(i) for i in order[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]


def split_dataset(
    dataset: Dataset, ratios: Sequence[float], seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    parts = split_indices(len(dataset), ratios, seed)
    return tuple(
        Dataset(tuple(dataset.examples[i] for i in idx), dataset.vocab, dataset.catalog, split)
        for split, idx in zip(SPLITS, parts)
    )
