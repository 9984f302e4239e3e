"""Linear softmax classifiers over hashed features.

Three variants share one trainer: the intent-prefix classifier and the action
classifier score (message, reply prefix) pairs, the evaluation classifier
scores complete replies on their own.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import log_softmax, logsumexp

from . import artifacts
from .corpus import Dataset, Example
from .features import (
    HASH_NAME,
    N_BUCKETS,
    ColumnMap,
    bucket,
    featurize,
    featurize_utterance,
    message_feature_strings,
    ngram_strings,
)

FORMAT = "replyguide.linear-softmax"
VERSION = 1
ACTION_CLASSES = ("accept", "reject")
# above this many weights a step updates only the rows present in the batch
DENSE_UPDATE_LIMIT = 2_000_000


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 20
    l2: float = 1e-4
    batch: int = 32
    seed: int = 0


@dataclass(frozen=True)
class PrefixSample:
    message: tuple[str, ...]
    prefix: tuple[str, ...]
    label: int


@dataclass(eq=False)
class LinearSoftmaxModel:
    classes: tuple[str, ...]
    columns: ColumnMap
    # one row per active bucket, one column per class
    weights: np.ndarray
    bias: np.ndarray
    mode: str = "pair"  # "pair" (message, prefix) or "utterance"
    n_buckets: int = N_BUCKETS
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("need at least 2 classes")
        if self.weights.shape != (len(self.columns), len(self.classes)):
            raise ValueError("weights shape does not match columns x classes")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_index(self, name: str) -> int:
        return self.classes.index(name)

    def scores(self, features: dict[int, int]) -> np.ndarray:
        cols, vals = self.columns.lookup(features)
        return vals @ self.weights[cols] + self.bias

    def features(self, message: Sequence[str], prefix: Sequence[str]) -> dict[int, int]:
        if self.mode == "utterance":
            return featurize_utterance(prefix)
        return featurize(message, prefix)


def predict_logprobs(model: LinearSoftmaxModel, features: dict[int, int]) -> np.ndarray:
    return log_softmax(model.scores(features))


def classify(model: LinearSoftmaxModel, message: Sequence[str], prefix: Sequence[str]) -> np.ndarray:
    return predict_logprobs(model, model.features(message, prefix))


def predict_label(model: LinearSoftmaxModel, message: Sequence[str], prefix: Sequence[str]) -> str:
    return model.classes[int(np.argmax(classify(model, message, prefix)))]


def extension_logprobs(
    model: LinearSoftmaxModel,
    message: Sequence[str],
    prefix: Sequence[str],
    candidates: Sequence[str],
) -> np.ndarray:
    """Class log-probs for every one-token extension ``prefix + [c]``.

    Equal to calling ``classify`` per candidate, but the shared message and
    prefix features are scored once.
    """
    if model.mode != "pair":
        return np.stack([classify(model, message, [*prefix, c]) for c in candidates])
    shared = message_feature_strings(message) + ngram_strings("p:", prefix)
    base = model.bias.copy()
    cols, vals = model.columns.lookup(_count(shared))
    base += vals @ model.weights[cols]
    length_feat = f"len:{(len(prefix) + 1) // 5}"
    last = prefix[-1] if prefix else None
    out = np.empty((len(candidates), model.n_classes))
    for i, c in enumerate(candidates):
        extra = [f"p:{c}", length_feat]
        if last is not None:
            extra.append(f"p:{last} {c}")
        cols, vals = model.columns.lookup(_count(extra))
        out[i] = base + vals @ model.weights[cols]
    return log_softmax(out, axis=1)


def _count(strings: Sequence[str]) -> dict[int, int]:
    vec: dict[int, int] = {}
    for s in strings:
        b = bucket(s)
        vec[b] = vec.get(b, 0) + 1
    return vec


# -- training ----------------------------------------------------------------

def _cross_entropy(scores: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of score rows and its gradient w.r.t. the scores."""
    n = scores.shape[0]
    top = scores.max(axis=1, keepdims=True)
    expd = np.exp(scores - top)
    norm = expd.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    loss = float(np.mean(np.log(norm[:, 0]) + top[:, 0] - scores[rows, y]))
    G = expd / norm
    G[rows, y] -= 1.0
    return loss, G / n


def _sum_by_column(cols: np.ndarray, contrib: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse per-entry rows onto unique columns: (unique cols, summed rows)."""
    order = np.argsort(cols, kind="stable")
    sc = cols[order]
    starts = np.flatnonzero(np.r_[True, sc[1:] != sc[:-1]])
    return sc[starts], np.add.reduceat(contrib[order], starts)


def _scatter_rows(X: sp.csr_matrix, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry weight gradient contributions: (column ids, rows of X^T G)."""
    seg = np.repeat(np.arange(X.shape[0]), np.diff(X.indptr))
    return X.indices, X.data[:, None] * G[seg]


def softmax_loss_and_grad(weights, bias, X: sp.csr_matrix, y, l2: float):
    """L2-penalised mean cross-entropy and its exact gradient (weights, bias)."""
    y = np.asarray(y)
    loss, G = _cross_entropy(X @ weights + bias, y)
    loss += 0.5 * l2 * float(np.sum(weights * weights))
    gW = l2 * weights.copy()
    cols, contrib = _scatter_rows(X, G)
    np.add.at(gW, cols, contrib)
    return loss, gW, G.sum(axis=0)


def train_softmax(
    vectors: Sequence[dict[int, int]],
    labels: Sequence[int],
    classes: Sequence[str],
    config: TrainConfig = TrainConfig(),
    mode: str = "pair",
) -> LinearSoftmaxModel:
    """Seeded mini-batch SGD with linearly decaying step size.

    The L2 shrinkage is kept as a scalar factor on the weights, so for large
    models a step only touches the rows of features present in the batch.
    """
    y = np.asarray(labels, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain at least 2 classes")
    columns = ColumnMap.fit(vectors)
    X = columns.matrix(vectors)
    if np.any(np.diff(X.indptr) == 0):
        raise ValueError("every training sample needs at least one feature")
    n, J = X.shape[0], len(classes)
    C = len(columns)
    dense = C * J <= DENSE_UPDATE_LIMIT
    V = np.zeros((C, J))
    bias = np.zeros(J)
    scale = 1.0
    rng = np.random.default_rng(config.seed)
    total = config.epochs * -(-n // config.batch)
    t = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        Xp, yp = X[order], y[order]
        indptr, indices, data = Xp.indptr, Xp.indices, Xp.data
        entry_row = np.repeat(np.arange(n), np.diff(indptr))
        for start in range(0, n, config.batch):
            stop = min(start + config.batch, n)
            lo, hi = indptr[start], indptr[stop]
            cols, vals = indices[lo:hi], data[lo:hi]
            seg = entry_row[lo:hi] - start
            lr = config.lr * (1.0 - t / total)
            if dense:
                Xb = np.zeros((stop - start, C))
                Xb[seg, cols] = vals
                _, G = _cross_entropy((Xb @ V) * scale + bias, yp[start:stop])
                scale *= 1.0 - lr * config.l2
                V -= (lr / scale) * (Xb.T @ G)
            else:
                scores = np.add.reduceat(vals[:, None] * V[cols], indptr[start:stop] - lo)
                _, G = _cross_entropy(scores * scale + bias, yp[start:stop])
                scale *= 1.0 - lr * config.l2
                ucols, upd = _sum_by_column(cols, vals[:, None] * G[seg])
                V[ucols] -= (lr / scale) * upd
            bias -= lr * G.sum(axis=0)
            t += 1
    return LinearSoftmaxModel(tuple(classes), columns, V * scale, bias, mode=mode)


# -- the three classifiers ---------------------------------------------------

def make_prefix_samples(dataset: Dataset, labeler: Callable[[Example], int]) -> list[PrefixSample]:
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    decode = dataset.vocab.decode
    samples = []
    for ex in dataset:
        msg = tuple(decode(ex.message))
        rep = tuple(decode(ex.reply))
        label = labeler(ex)
        for t in range(len(rep) + 1):
            samples.append(PrefixSample(msg, rep[:t], label))
    return samples


def _train_on_samples(samples, classes, config, kind, train: Dataset) -> LinearSoftmaxModel:
    vectors = [featurize(s.message, s.prefix) for s in samples]
    model = train_softmax(vectors, [s.label for s in samples], classes, config)
    model.provenance = {
        "kind": kind, "split": train.split, "n_examples": len(train),
        "n_samples": len(samples), "filtered": False, "config": asdict(config),
    }
    return model


def train_intent_prefix_classifier(train: Dataset, config: TrainConfig = TrainConfig()) -> LinearSoftmaxModel:
    catalog = train.catalog
    samples = make_prefix_samples(train, lambda ex: catalog.index(ex.intent))
    return _train_on_samples(samples, catalog.labels, config, "intent_prefix", train)


def train_action_classifier(
    train: Dataset, rejected_ids, config: TrainConfig = TrainConfig()
) -> LinearSoftmaxModel:
    rejected = set(rejected_ids)
    unknown = rejected - set(train.ids())
    if unknown:
        raise ValueError(f"rejected ids not in the training split: {sorted(unknown)[:3]}")
    samples = make_prefix_samples(train, lambda ex: int(ex.id in rejected))
    return _train_on_samples(samples, ACTION_CLASSES, config, "action", train)


def train_eval_intent_classifier(
    train: Dataset, config: TrainConfig = TrainConfig(), seed: int | None = None
) -> LinearSoftmaxModel:
    """Full-reply intent classifier for R@1, independent of the guidance model."""
    if seed is not None:
        config = TrainConfig(config.lr, config.epochs, config.l2, config.batch, seed)
    catalog = train.catalog
    vectors = [featurize_utterance(train.vocab.decode(ex.reply)) for ex in train]
    labels = [catalog.index(ex.intent) for ex in train]
    model = train_softmax(vectors, labels, catalog.labels, config, mode="utterance")
    model.provenance = {
        "kind": "eval_intent", "split": train.split, "n_examples": len(train),
        "n_samples": len(vectors), "filtered": False, "config": asdict(config),
    }
    return model


# -- persistence -------------------------------------------------------------

def save_classifier(model: LinearSoftmaxModel, path: str | Path) -> None:
    meta = {
        "format": FORMAT, "version": VERSION, "classes": list(model.classes),
        "mode": model.mode, "n_buckets": model.n_buckets, "hash": HASH_NAME,
        "provenance": model.provenance,
    }
    artifacts.save_bundle(path, meta, {
        "buckets": model.columns.buckets, "weights": model.weights, "bias": model.bias,
    })


def load_classifier(path: str | Path) -> LinearSoftmaxModel:
    meta, arr = artifacts.load_bundle(path, FORMAT)
    if meta["hash"] != HASH_NAME or meta["n_buckets"] != N_BUCKETS:
        raise artifacts.ArtifactError(f"{path}: incompatible feature hashing")
    return LinearSoftmaxModel(
        tuple(meta["classes"]), ColumnMap(arr["buckets"]), arr["weights"], arr["bias"],
        mode=meta["mode"], provenance=meta["provenance"],
    )
