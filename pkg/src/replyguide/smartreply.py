"""Dual-encoder smart reply: in-batch contrastive training and top-K retrieval."""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import artifacts
from .corpus import Dataset, Vocab
from .features import ColumnMap, featurize_text

FORMAT = "replyguide.retriever"
VERSION = 1


@dataclass(frozen=True)
class RetrieverConfig:
    d: int = 64
    lr: float = 0.5
    epochs: int = 10
    batch: int = 32
    seed: int = 0
    init_scale: float = 0.1
    k: int = 3
    dedupe_intents: bool = False


@dataclass(eq=False)
class DualEncoder:
    columns: ColumnMap
    # (active buckets x d) projections for each tower
    message_proj: np.ndarray
    reply_proj: np.ndarray
    provenance: dict = field(default_factory=dict)

    def _matrix(self, texts: Sequence[Sequence[str]]) -> sp.csr_matrix:
        return text_matrix(self.columns, texts)

    def embed_messages(self, texts: Sequence[Sequence[str]]) -> np.ndarray:
        return self._matrix(texts) @ self.message_proj

    def embed_replies(self, texts: Sequence[Sequence[str]]) -> np.ndarray:
        return self._matrix(texts) @ self.reply_proj


def unit_rows(X: sp.csr_matrix) -> sp.csr_matrix:
    """Scale each row to unit L2 norm (empty rows stay zero)."""
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    return sp.csr_matrix(sp.diags(1.0 / norms) @ X)


def text_matrix(columns: ColumnMap, texts: Sequence[Sequence[str]]) -> sp.csr_matrix:
    return unit_rows(columns.matrix([featurize_text(t) for t in texts]))


@dataclass(frozen=True)
class Suggestion:
    reply: tuple[int, ...]
    intent: str
    score: float


@dataclass(frozen=True)
class SuggestionSet:
    entries: tuple[Suggestion, ...]

    def __post_init__(self):
        scores = [e.score for e in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("suggestion scores must be non-increasing")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def intents(self) -> list[str]:
        return [e.intent for e in self.entries]


@dataclass(eq=False)
class ReplyIndex:
    vocab: Vocab
    replies: list[tuple[int, ...]]
    intents: list[str]
    embeddings: np.ndarray

    def __len__(self) -> int:
        return len(self.replies)


def in_batch_loss_and_grad(Xm, Xr, message_proj, reply_proj):
    """Mean in-batch softmax loss (row i's positive is reply i) and its gradients.

    Xm, Xr are dense (B x buckets) feature blocks for B aligned pairs.
    """
    Em, Er = Xm @ message_proj, Xr @ reply_proj
    S = Em @ Er.T
    B = S.shape[0]
    top = S.max(axis=1, keepdims=True)
    expd = np.exp(S - top)
    norm = expd.sum(axis=1, keepdims=True)
    diag = np.arange(B)
    loss = float(np.mean(np.log(norm[:, 0]) + top[:, 0] - S[diag, diag]))
    G = expd / norm
    G[diag, diag] -= 1.0
    G /= B
    return loss, Xm.T @ (G @ Er), Xr.T @ (G.T @ Em)


def _dense_rows(X: sp.csr_matrix, rows: np.ndarray) -> np.ndarray:
    return X[rows].toarray()


def train_dual_encoder(train: Dataset, config: RetrieverConfig = RetrieverConfig()) -> DualEncoder:
    n = len(train)
    if config.batch < 2:
        raise ValueError("batch must be >= 2")
    if config.batch > n:
        raise ValueError(f"batch {config.batch} larger than dataset ({n} examples)")
    decode = train.vocab.decode
    mvec = [featurize_text(decode(ex.message)) for ex in train]
    rvec = [featurize_text(decode(ex.reply)) for ex in train]
    columns = ColumnMap.fit(mvec + rvec)
    Xm, Xr = unit_rows(columns.matrix(mvec)), unit_rows(columns.matrix(rvec))
    rng = np.random.default_rng(config.seed)
    Pm = rng.normal(0.0, config.init_scale, size=(len(columns), config.d))
    Pr = rng.normal(0.0, config.init_scale, size=(len(columns), config.d))
    steps = n // config.batch  # the ragged last batch is dropped
    total = config.epochs * steps
    t = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for s in range(steps):
            rows = order[s * config.batch: (s + 1) * config.batch]
            _, gm, gr = in_batch_loss_and_grad(
                _dense_rows(Xm, rows), _dense_rows(Xr, rows), Pm, Pr
            )
            lr = config.lr * (1.0 - t / total)
            Pm -= lr * gm
            Pr -= lr * gr
            t += 1
    return DualEncoder(columns, Pm, Pr, provenance={
        "split": train.split, "n_examples": n, "config": asdict(config),
    })


def dataset_loss(encoder: DualEncoder, data: Dataset, batch: int, seed: int = 0) -> float:
    """Mean in-batch loss over seeded full batches of ``data``."""
    decode = data.vocab.decode
    Xm = encoder._matrix([decode(ex.message) for ex in data])
    Xr = encoder._matrix([decode(ex.reply) for ex in data])
    order = np.random.default_rng(seed).permutation(len(data))
    losses = []
    for s in range(len(data) // batch):
        rows = order[s * batch: (s + 1) * batch]
        loss, _, _ = in_batch_loss_and_grad(
            _dense_rows(Xm, rows), _dense_rows(Xr, rows), encoder.message_proj, encoder.reply_proj
        )
        losses.append(loss)
    return float(np.mean(losses))


def build_reply_index(encoder: DualEncoder, train: Dataset) -> ReplyIndex:
    labels: dict[tuple[int, ...], Counter] = {}
    for ex in train:
        labels.setdefault(ex.reply, Counter())[ex.intent] += 1
    replies = list(labels)  # first-occurrence order
    intents = [min(c, key=lambda lab: (-c[lab], lab)) for c in labels.values()]
    emb = encoder.embed_replies([train.vocab.decode(r) for r in replies])
    return ReplyIndex(train.vocab, replies, intents, emb)


def retrieve_suggestions(
    encoder: DualEncoder,
    index: ReplyIndex,
    message: Sequence[int],
    K: int = 3,
    dedupe_intents: bool = False,
) -> SuggestionSet:
    """Top-K replies by dot product; ties keep index insertion order."""
    if K > len(index):
        raise ValueError(f"K={K} exceeds index size {len(index)}")
    query = encoder.embed_messages([index.vocab.decode(message)])[0]
    scores = index.embeddings @ query
    ranked = np.argsort(-scores, kind="stable")
    picked: list[int] = []
    seen: set[str] = set()
    for i in ranked:
        if dedupe_intents and index.intents[i] in seen:
            continue
        picked.append(int(i))
        seen.add(index.intents[i])
        if len(picked) == K:
            break
    if len(picked) < K:
        raise ValueError(f"fewer than K={K} distinct intents in the index")
    return SuggestionSet(tuple(
        Suggestion(index.replies[i], index.intents[i], float(scores[i])) for i in picked
    ))


def save_retriever(encoder: DualEncoder, index: ReplyIndex, path: str | Path) -> None:
    meta = {
        "format": FORMAT, "version": VERSION, "provenance": encoder.provenance,
        "vocab": list(index.vocab.tokens), "intents": index.intents,
        "replies": [list(r) for r in index.replies],
    }
    artifacts.save_bundle(path, meta, {
        "buckets": encoder.columns.buckets, "message_proj": encoder.message_proj,
        "reply_proj": encoder.reply_proj, "embeddings": index.embeddings,
    })


def load_retriever(path: str | Path) -> tuple[DualEncoder, ReplyIndex]:
    meta, arr = artifacts.load_bundle(path, FORMAT)
    encoder = DualEncoder(
        ColumnMap(arr["buckets"]), arr["message_proj"], arr["reply_proj"], meta["provenance"]
    )
    index = ReplyIndex(
        Vocab(tuple(meta["vocab"])), [tuple(r) for r in meta["replies"]],
        list(meta["intents"]), arr["embeddings"],
    )
    return encoder, index
