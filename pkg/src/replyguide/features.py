"""Hashed sparse features shared by the classifiers and the dual encoder.

Feature strings are namespaced ("m:" message, "p:" reply prefix, "len:" prefix
length bucket) and mapped to buckets with 64-bit FNV-1a modulo ``N_BUCKETS``.
"""
from __future__ import annotations

from collections import Counter
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

N_BUCKETS = 1 << 18
HASH_NAME = "fnv1a64"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


@lru_cache(maxsize=1 << 20)
def bucket(feature: str, n_buckets: int = N_BUCKETS) -> int:
    return fnv1a_64(feature.encode("utf-8")) % n_buckets


def ngram_strings(ns: str, tokens: Sequence[str]) -> list[str]:
    feats = [ns + t for t in tokens]
    feats += [f"{ns}{a} {b}" for a, b in zip(tokens, tokens[1:])]
    return feats


def message_feature_strings(message: Sequence[str]) -> list[str]:
    return ngram_strings("m:", message)


def prefix_feature_strings(prefix: Sequence[str]) -> list[str]:
    return ngram_strings("p:", prefix) + [f"len:{len(prefix) // 5}"]


def to_vector(strings: Iterable[str]) -> dict[int, int]:
    counts = Counter(bucket(s) for s in strings)
    return dict(sorted(counts.items()))


def featurize(message: Sequence[str], prefix: Sequence[str]) -> dict[int, int]:
    """Sparse bucket -> count map for a (message, reply prefix) pair."""
    if not message:
        raise ValueError("message must be non-empty")
    return to_vector(message_feature_strings(message) + prefix_feature_strings(prefix))


def featurize_utterance(tokens: Sequence[str]) -> dict[int, int]:
    """Features of a complete reply on its own, used by the evaluation classifier."""
    return to_vector(prefix_feature_strings(tokens))


def featurize_text(tokens: Sequence[str]) -> dict[int, int]:
    """Message-namespace features of any text (both towers of the dual encoder)."""
    return to_vector(message_feature_strings(tokens))


class ColumnMap:
    """Dense column ids for the buckets seen in training.

    Buckets never seen in training keep zero weight under any of our trainers, so
    storing only the seen ones is equivalent to the full bucket space.
    """

    def __init__(self, buckets: np.ndarray):
        self.buckets = np.asarray(buckets, dtype=np.int64)
        self._col = {int(b): i for i, b in enumerate(self.buckets)}

    @classmethod
    def fit(cls, vectors: Iterable[dict[int, int]]) -> ColumnMap:
        seen = set()
        for v in vectors:
            seen.update(v)
        return cls(np.array(sorted(seen), dtype=np.int64))

    def __len__(self) -> int:
        return len(self.buckets)

    def lookup(self, vec: dict[int, int]) -> tuple[np.ndarray, np.ndarray]:
        cols, vals = [], []
        for b, c in vec.items():
            i = self._col.get(b)
            if i is not None:
                cols.append(i)
                vals.append(c)
        return np.array(cols, dtype=np.int64), np.array(vals, dtype=float)

    def matrix(self, vectors: Sequence[dict[int, int]]) -> sp.csr_matrix:
        lengths = np.fromiter((len(v) for v in vectors), dtype=np.int64, count=len(vectors))
        keys = np.fromiter((b for v in vectors for b in v), dtype=np.int64, count=int(lengths.sum()))
        vals = np.fromiter((c for v in vectors for c in v.values()), dtype=float, count=len(keys))
        pos = np.searchsorted(self.buckets, keys)
        pos_c = np.minimum(pos, max(len(self.buckets) - 1, 0))
        known = (pos < len(self.buckets)) & (self.buckets[pos_c] == keys) if len(self.buckets) else np.zeros(len(keys), bool)
        rows = np.repeat(np.arange(len(vectors)), lengths)
        X = sp.csr_matrix(
            (vals[known], (rows[known], pos_c[known])), shape=(len(vectors), len(self))
        )
        X.sort_indices()
        return X
