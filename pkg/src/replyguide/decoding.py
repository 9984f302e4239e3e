"""Reply generation: vanilla beam search, classifier-guided search and the baselines.

All methods share one beam loop. A method only decides which tokens a
hypothesis may be extended with and how each extension is scored.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .classifiers import LinearSoftmaxModel, classify, extension_logprobs, predict_label
from .corpus import BOS, EOS, PAD, SEP, UNK
from .lm import lm_sequence
from .smartreply import SuggestionSet

METHODS = (
    "baseline", "nifty_intent", "nifty_action", "rerank_intent",
    "rerank_action", "unlikelihood", "rules",
)
RESERVED_IDS = frozenset({PAD, UNK, BOS, EOS, SEP})


@dataclass(frozen=True)
class GuidanceConfig:
    method: str = "baseline"
    alpha: float = 1.0
    beams: int = 5
    top_k_rescore: int = 10
    max_len: int = 30
    unlikelihood_beta: float = 2.0
    reselect_intent_each_step: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.alpha < 0 or self.unlikelihood_beta < 0:
            raise ValueError("alpha and unlikelihood_beta must be >= 0")
        if self.beams < 1 or self.max_len < 1:
            raise ValueError("beams and max_len must be >= 1")
        if self.top_k_rescore < self.beams:
            raise ValueError("top_k_rescore must be >= beams")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]  # includes the final EOS when one was emitted
    base_logprob: float = 0.0
    combined_logprob: float = 0.0
    finished: bool = False

    @property
    def reply(self) -> tuple[int, ...]:
        if self.tokens and self.tokens[-1] == EOS:
            return self.tokens[:-1]
        return self.tokens


@dataclass(frozen=True)
class IntentAttribute:
    label: str
    excluded: frozenset = field(default_factory=frozenset)  # suggestion intents


@dataclass(frozen=True)
class ActionAttribute:
    label: str = "reject"


# an expansion is (token, base log-prob term, combined score term)
Expander = Callable[[Hypothesis, np.ndarray], Iterable[tuple[int, float, float]]]


def top_k_tokens(logprobs: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k best finite entries, ties broken towards the smaller id."""
    finite = np.flatnonzero(np.isfinite(logprobs))
    order = np.lexsort((finite, -logprobs[finite]))
    return finite[order[:k]]


def reply_logprobs(lm, context: Sequence[int]) -> np.ndarray:
    """Generator log-probs for the next reply token.

    A reply never contains the separator, so its mass is removed and the rest
    renormalized.
    """
    logp = np.array(lm.next_token_logprobs(context), dtype=float)
    logp[SEP] = -np.inf
    finite = np.isfinite(logp)
    logp[finite] -= logsumexp(logp[finite])
    return logp


def _rank_key(h: Hypothesis):
    return (-h.combined_logprob, h.tokens)


def _search(lm, message: Sequence[int], config: GuidanceConfig, expand: Expander) -> list[Hypothesis]:
    ctx = lm_sequence(message)
    active = [Hypothesis(())]
    finished: list[Hypothesis] = []
    for _ in range(config.max_len):
        pool = []
        for h in active:
            logp = reply_logprobs(lm, ctx + list(h.tokens))
            for tok, base, comb in expand(h, logp):
                tok = int(tok)
                pool.append(Hypothesis(
                    h.tokens + (tok,), h.base_logprob + base, h.combined_logprob + comb, tok == EOS,
                ))
        pool.sort(key=_rank_key)
        active = []
        for h in pool[: config.beams]:
            (finished if h.finished else active).append(h)
        if not active:
            break
    finished.extend(replace(h, finished=True) for h in active)  # hit max_len
    finished.sort(key=_rank_key)
    return finished


def _vanilla_expander(config: GuidanceConfig) -> Expander:
    def expand(h, logp):
        for tok in top_k_tokens(logp, config.top_k_rescore):
            yield tok, float(logp[tok]), float(logp[tok])
    return expand


def beam_search(lm, message: Sequence[int], config: GuidanceConfig) -> list[Hypothesis]:
    """Width-n beam search on generator log-probs, ranked by raw summed log-prob."""
    return _search(lm, message, config, _vanilla_expander(config))


# -- classifier guidance -----------------------------------------------------

def select_target_intent(
    classifier: LinearSoftmaxModel,
    message: Sequence[str],
    suggestion_intents: Iterable[str],
    prefix: Sequence[str] = (),
) -> str:
    """Most likely intent absent from the suggestions (ties: smallest label)."""
    excluded = set(suggestion_intents)
    logp = classify(classifier, message, prefix)
    eligible = [j for j, lab in enumerate(classifier.classes) if lab not in excluded]
    if not eligible:
        raise ValueError("no eligible intent")
    best = min(eligible, key=lambda j: (-logp[j], classifier.classes[j]))
    return classifier.classes[best]


def _attribute_class(classifier: LinearSoftmaxModel, attribute) -> int:
    return classifier.class_index(attribute.label)


def guided_step(
    lm, classifier: LinearSoftmaxModel, attribute, hypothesis: Hypothesis,
    message: Sequence[int], config: GuidanceConfig, logprobs: np.ndarray | None = None,
) -> list[tuple[int, float, float]]:
    """Score the top-k base tokens as base + alpha * log p(attribute | m, prefix + token).

    EOS is scored with the classifier on the finished reply itself.
    """
    if hypothesis.finished:
        raise ValueError("cannot extend a finished hypothesis")
    vocab = lm.vocab
    msg = vocab.decode(message)
    prefix = vocab.decode(hypothesis.tokens)
    if logprobs is None:
        logprobs = reply_logprobs(lm, lm_sequence(message) + list(hypothesis.tokens))
    cands = top_k_tokens(logprobs, config.top_k_rescore)
    if isinstance(attribute, IntentAttribute) and config.reselect_intent_each_step:
        attribute = replace(attribute, label=select_target_intent(
            classifier, msg, attribute.excluded, prefix))
    cls = _attribute_class(classifier, attribute)
    words = [c for c in cands if c != EOS]
    clf = {}
    if words:
        ext = extension_logprobs(classifier, msg, prefix, vocab.decode(words))
        clf = dict(zip(words, ext[:, cls]))
    if len(words) < len(cands):
        clf[EOS] = classify(classifier, msg, prefix)[cls]
    return [
        (int(c), float(logprobs[c]), float(logprobs[c]) + config.alpha * float(clf[c]))
        for c in cands
    ]


def guided_search(lm, classifier, attribute, message, config) -> list[Hypothesis]:
    def expand(h, logp):
        return guided_step(lm, classifier, attribute, h, message, config, logp)
    return _search(lm, message, config, expand)


def nifty_decode(lm, classifier, attribute, message, config) -> tuple[int, ...]:
    return guided_search(lm, classifier, attribute, message, config)[0].reply


# -- baselines ---------------------------------------------------------------

def rerank_decode(
    lm, classifier, attribute, message, config, beams: Sequence[Hypothesis] | None = None
) -> tuple[int, ...]:
    """Best of the n vanilla beams under the attribute classifier; ties keep base order."""
    if beams is None:
        beams = beam_search(lm, message, config)
    beams = list(beams)[: config.beams]
    vocab = lm.vocab
    msg = vocab.decode(message)
    cls = _attribute_class(classifier, attribute)
    scores = [classify(classifier, msg, vocab.decode(h.reply))[cls] for h in beams]
    best = min(range(len(beams)), key=lambda i: (-scores[i], i))
    return beams[best].reply


def penalty_tokens(suggestions: SuggestionSet) -> frozenset[int]:
    toks = set()
    for s in suggestions:
        toks.update(s.reply)
    return frozenset(toks - RESERVED_IDS)


def unlikelihood_scores(
    logprobs: np.ndarray, candidates: np.ndarray, penalized: frozenset[int], beta: float
) -> np.ndarray:
    """Candidate log-probs with beta subtracted from penalized tokens, renormalized over the candidates."""
    scores = logprobs[candidates].astype(float)
    if beta == 0:
        return scores
    hit = np.fromiter((int(c) in penalized for c in candidates), dtype=bool, count=len(candidates))
    if not hit.any():
        return scores
    scores[hit] -= beta
    return scores - logsumexp(scores)


def unlikelihood_search(lm, suggestions: SuggestionSet, message, config) -> list[Hypothesis]:
    penalized = penalty_tokens(suggestions)

    def expand(h, logp):
        cands = top_k_tokens(logp, config.top_k_rescore)
        scores = unlikelihood_scores(logp, cands, penalized, config.unlikelihood_beta)
        for tok, sc in zip(cands, scores):
            yield tok, float(logp[tok]), float(sc)

    return _search(lm, message, config, expand)


def unlikelihood_decode(lm, suggestions: SuggestionSet, message, config) -> tuple[int, ...]:
    return unlikelihood_search(lm, suggestions, message, config)[0].reply


def rules_decode(
    lm, classifier, suggestion_intents, message, config,
    beams: Sequence[Hypothesis] | None = None,
) -> tuple[int, ...]:
    """Drop beams whose predicted intent was among the suggestions; fall back to the top beam."""
    if beams is None:
        beams = beam_search(lm, message, config)
    beams = list(beams)[: config.beams]
    excluded = set(suggestion_intents)
    vocab = lm.vocab
    msg = vocab.decode(message)
    for h in beams:
        if predict_label(classifier, msg, vocab.decode(h.reply)) not in excluded:
            return h.reply
    return beams[0].reply
