"""Small hand-checkable models and brute-force oracles shared by the tests."""
from __future__ import annotations

import itertools
import zlib

import numpy as np

from replyguide.classifiers import LinearSoftmaxModel, classify
from replyguide.corpus import EOS, RESERVED, SEP, Vocab
from replyguide.features import ColumnMap, bucket, message_feature_strings, ngram_strings


def toy_vocab(n_words: int) -> Vocab:
    return Vocab(RESERVED + tuple("abcdefgh"[:n_words]))


class TableLM:
    """Next-token distributions drawn per reply prefix from a seeded Dirichlet.

    Only the word tokens and EOS get probability mass.
    """

    def __init__(self, n_words: int, seed: int, concentration: float = 1.0):
        self.vocab = toy_vocab(n_words)
        self.support = np.array([EOS] + list(range(len(RESERVED), len(self.vocab))))
        self.seed = seed
        self.concentration = concentration

    @staticmethod
    def reply_part(context) -> tuple[int, ...]:
        ctx = list(context)
        return tuple(ctx[len(ctx) - ctx[::-1].index(SEP):]) if SEP in ctx else ()

    def next_token_logprobs(self, context) -> np.ndarray:
        key = self.reply_part(context)
        rng = np.random.default_rng([self.seed, zlib.crc32(repr(key).encode())])
        p = rng.dirichlet(np.full(len(self.support), self.concentration))
        out = np.full(len(self.vocab), -np.inf)
        out[self.support] = np.log(p)
        return out


class FixedLM:
    """Next-token log-probs read from a dict keyed by reply prefix (default row otherwise)."""

    def __init__(self, vocab: Vocab, rows: dict, default):
        self.vocab = vocab
        self.rows = rows
        self.default = default

    def next_token_logprobs(self, context) -> np.ndarray:
        key = TableLM.reply_part(context)
        probs = self.rows.get(key, self.default)
        out = np.full(len(self.vocab), -np.inf)
        for tok, p in probs.items():
            out[self.vocab.id(tok)] = np.log(p)
        return out


def random_classifier(vocab: Vocab, message, classes, seed: int, scale: float = 2.0) -> LinearSoftmaxModel:
    """Pair-mode classifier with random weights on every feature a toy reply can produce."""
    words = [t for t in vocab.tokens[len(RESERVED):]]
    feats = set(message_feature_strings(message))
    feats.update(ngram_strings("p:", words))
    feats.update(f"p:{a} {b}" for a in words for b in words)
    feats.update(f"len:{k}" for k in range(3))
    buckets = np.array(sorted({bucket(f) for f in feats}), dtype=np.int64)
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, scale, size=(len(buckets), len(classes)))
    b = rng.normal(0.0, 1.0, size=len(classes))
    return LinearSoftmaxModel(tuple(classes), ColumnMap(buckets), w, b)


def all_replies(lm, max_len: int):
    """Every complete reply: EOS-terminated up to max_len, or max_len words without EOS."""
    words = [int(t) for t in lm.support if t != EOS]
    for length in range(0, max_len + 1):
        for body in itertools.product(words, repeat=length):
            yield body + (EOS,) if length < max_len else body


def sequence_scores(lm, message, tokens, classifier=None, cls=None, alpha=0.0):
    """(base, combined) score of a complete reply under the decoding objective."""
    from replyguide.decoding import reply_logprobs
    from replyguide.lm import lm_sequence

    vocab = lm.vocab
    ctx = lm_sequence(message)
    msg = vocab.decode(message)
    base = comb = 0.0
    for t, tok in enumerate(tokens):
        lp = float(reply_logprobs(lm, ctx + list(tokens[:t]))[tok])
        base += lp
        comb += lp
        if classifier is not None:
            prefix = tokens[:t] if tok == EOS else tokens[: t + 1]
            comb += alpha * float(classify(classifier, msg, vocab.decode(prefix))[cls])
    return base, comb


def brute_force_best(lm, message, max_len, classifier=None, cls=None, alpha=0.0):
    best = None
    for r in all_replies(lm, max_len):
        base, comb = sequence_scores(lm, message, r, classifier, cls, alpha)
        key = (-comb, r)
        if best is None or key < best[0]:
            best = (key, r)
    return best[1]
