"""Absolute-discount backoff n-gram generator over BOS . message . SEP . reply . EOS."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .artifacts import ArtifactError
from .corpus import BOS, EOS, PAD, SEP, Dataset, Vocab

FORMAT = "replyguide.ngram"
VERSION = 1


def lm_sequence(message: Sequence[int], reply: Sequence[int] = ()) -> list[int]:
    return [BOS, *message, SEP, *reply]


@dataclass(frozen=True, eq=False)
class NGramModel:
    order: int
    discount: float
    vocab: Vocab
    # counts[k] maps a k-gram (context of length k-1 plus target) to its count
    counts: tuple[dict, ...]
    provenance: dict = field(default_factory=dict)
    _tables: list = field(init=False, repr=False)
    _unigram: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must be in [0, 1)")
        V = len(self.vocab)
        uni = np.ones(V)
        for (w,), c in self.counts[0].items():
            uni[w] += c
        uni[[PAD, BOS]] = 0.0
        object.__setattr__(self, "_unigram", uni / uni.sum())
        # per order k >= 2: context -> (target ids, counts, context total, distinct)
        tables = []
        for k in range(2, self.order + 1):
            grouped = defaultdict(list)
            for gram, c in self.counts[k - 1].items():
                grouped[gram[:-1]].append((gram[-1], c))
            table = {}
            for ctx, items in grouped.items():
                items.sort()
                ids = np.array([w for w, _ in items], dtype=np.int64)
                cnt = np.array([c for _, c in items], dtype=float)
                table[ctx] = (ids, cnt, cnt.sum(), len(items))
            tables.append(table)
        object.__setattr__(self, "_tables", tables)
        object.__setattr__(self, "_cache", {})

    @property
    def V(self) -> int:
        return len(self.vocab)

    @property
    def eos(self) -> int:
        return EOS

    def context_stats(self, context: Sequence[int]):
        """(ids, counts, total, distinct) for a context of length 1..order-1, or None."""
        return self._tables[len(context) - 1].get(tuple(context))

    def next_token_probs(self, context: Sequence[int]) -> np.ndarray:
        if not context:
            raise ValueError("context must contain at least BOS")
        key = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        p = self._unigram
        d = self.discount
        for k in range(1, len(key) + 1):
            stats = self._tables[k - 1].get(key[-k:])
            if stats is None:
                # unseen context: longer ones are unseen too
                break
            ids, cnt, total, distinct = stats
            lower = p
            p = lower * (d * distinct / total)
            p[ids] += np.maximum(cnt - d, 0.0) / total
        p.setflags(write=False)
        self._cache[key] = p
        return p

    def next_token_logprobs(self, context: Sequence[int]) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.next_token_probs(context))


def train_ngram(train: Dataset, order: int = 4, discount: float = 0.75) -> NGramModel:
    if len(train) == 0:
        raise ValueError("empty training set")
    if order < 1:
        raise ValueError("order must be >= 1")
    counts = [defaultdict(int) for _ in range(order)]
    for ex in train:
        seq = lm_sequence(ex.message, ex.reply) + [EOS]
        # BOS is context only; every later position is a prediction target
        for i in range(1, len(seq)):
            for k in range(1, order + 1):
                if i - k + 1 < 0:
                    break
                counts[k - 1][tuple(seq[i - k + 1: i + 1])] += 1
    return NGramModel(
        order, float(discount), train.vocab, tuple(dict(c) for c in counts),
        provenance={"split": train.split, "n_examples": len(train), "filtered": False},
    )


def next_token_logprobs(model, context: Sequence[int]) -> np.ndarray:
    return model.next_token_logprobs(context)


def sequence_logprob(model, message: Sequence[int], reply: Sequence[int]) -> float:
    if not reply:
        raise ValueError("reply must be non-empty")
    ctx = lm_sequence(message)
    total = 0.0
    for tok in [*reply, EOS]:
        total += float(model.next_token_logprobs(ctx)[tok])
        ctx.append(tok)
    return total


def save_ngram(model: NGramModel, path: str | Path) -> None:
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "order": model.order,
        "discount": model.discount,
        "vocab": list(model.vocab.tokens),
        "provenance": model.provenance,
        "counts": [sorted([*gram, c] for gram, c in table.items()) for table in model.counts],
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":"), sort_keys=True))


def load_ngram(path: str | Path) -> NGramModel:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}")
    payload = json.loads(path.read_text())
    if payload.get("format") != FORMAT or payload.get("version") != VERSION:
        raise ArtifactError(f"{path}: not a {FORMAT} v{VERSION} artifact")
    counts = tuple(
        {tuple(row[:-1]): row[-1] for row in table} for table in payload["counts"]
    )
    return NGramModel(
        payload["order"], payload["discount"], Vocab(tuple(payload["vocab"])), counts,
        provenance=payload.get("provenance", {}),
    )
