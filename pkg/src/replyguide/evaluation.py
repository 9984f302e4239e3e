"""Metrics, paired significance and the experiment harness."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import LinearSoftmaxModel, predict_label
from .corpus import Dataset, Example
from .decoding import (
    METHODS,
    ActionAttribute,
    GuidanceConfig,
    IntentAttribute,
    beam_search,
    guided_search,
    rerank_decode,
    rules_decode,
    select_target_intent,
    unlikelihood_decode,
)
from .smartreply import retrieve_suggestions

METHOD_NAMES = {
    "baseline": "Baseline",
    "nifty_intent": "NIFTY Intent",
    "nifty_action": "NIFTY Action",
    "rerank_intent": "Reranker Intent",
    "rerank_action": "Reranker Action",
    "unlikelihood": "Unlikelihood",
    "rules": "Rules-based",
}
P_VALUE_CONVENTION = (
    "one-sided paired bootstrap: fraction of resamples in which the method's mean "
    "does not exceed the baseline's"
)


class MissingArtifact(LookupError):
    pass


# -- metrics -----------------------------------------------------------------

WORD_BITS = 64


class SequenceBatch:
    """Many sequences encoded once, for LCS against one query at a time.

    Uses the bit-parallel LCS recurrence: one machine word holds a whole DP
    row's increments, so each query costs one vector pass per column of the
    batch. Queries longer than a word fall back to Python integers.
    """

    def __init__(self, seqs: Sequence[Sequence]):
        self.symbols: dict = {}
        width = max((len(s) for s in seqs), default=0)
        pad = -1
        codes = np.full((len(seqs), width), pad, dtype=np.int64)
        for i, s in enumerate(seqs):
            codes[i, :len(s)] = [self.symbols.setdefault(t, len(self.symbols)) for t in s]
        codes[codes == pad] = len(self.symbols)  # padding matches nothing
        self.codes = codes

    def __len__(self) -> int:
        return self.codes.shape[0]

    def lcs_with(self, query: Sequence) -> np.ndarray:
        n, w = len(query), self.codes.shape[1]
        if n == 0 or w == 0:
            return np.zeros(len(self), dtype=np.int64)
        masks = [0] * (len(self.symbols) + 1)
        for k, t in enumerate(query):
            j = self.symbols.get(t)
            if j is not None:
                masks[j] |= 1 << k
        full = (1 << n) - 1
        if n <= WORD_BITS:
            M = np.array(masks, dtype=np.uint64)
            mask = np.uint64(full)
            V = np.full(len(self), mask, dtype=np.uint64)
            for j in range(w):
                U = V & M[self.codes[:, j]]
                V = ((V + U) | (V - U)) & mask
            return np.bitwise_count(~V & mask).astype(np.int64)
        out = np.empty(len(self), dtype=np.int64)
        for i, row in enumerate(self.codes):
            V = full
            for c in row:
                U = V & masks[c]
                V = ((V + U) | (V - U)) & full
            out[i] = n - V.bit_count()
        return out


def lcs_length(a: Sequence, b: Sequence) -> int:
    return int(SequenceBatch([b]).lcs_with(a)[0])


def rouge_l(hypothesis: Sequence, reference: Sequence) -> float:
    """LCS-based F1 between token sequences."""
    if len(reference) == 0:
        raise ValueError("reference must be non-empty")
    if len(hypothesis) == 0:
        return 0.0
    lcs = lcs_length(hypothesis, reference)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hypothesis), lcs / len(reference)
    return 2 * p * r / (p + r)


def intent_hits(predictions, references: Sequence[Example], classifier: LinearSoftmaxModel, vocab) -> list[bool]:
    if len(predictions) != len(references):
        raise ValueError(f"{len(predictions)} predictions for {len(references)} references")
    return [
        predict_label(classifier, (), vocab.decode(p)) == ex.intent
        for p, ex in zip(predictions, references)
    ]


def r_at_1(predictions, references: Sequence[Example], classifier: LinearSoftmaxModel, vocab) -> float:
    """Share of predictions whose classified intent equals the reference label exactly."""
    hits = intent_hits(predictions, references, classifier, vocab)
    return sum(hits) / len(hits) if hits else 0.0


def paired_bootstrap(scores_a, scores_b, resamples: int = 10000, seed: int = 0) -> float:
    """Fraction of seeded paired resamples where mean(a*) <= mean(b*)."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("score lists must have equal length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 paired scores")
    diff = a - b
    rng = np.random.default_rng(seed)
    not_better = 0
    for start in range(0, resamples, 1000):
        idx = rng.integers(0, n, size=(min(1000, resamples - start), n))
        not_better += int(np.count_nonzero(diff[idx].mean(axis=1) <= 0))
    return not_better / resamples


# -- harness -----------------------------------------------------------------

@dataclass
class Models:
    lm: object = None
    encoder: object = None
    index: object = None
    intent_classifier: LinearSoftmaxModel | None = None
    action_classifier: LinearSoftmaxModel | None = None
    eval_classifier: LinearSoftmaxModel | None = None

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise MissingArtifact(f"missing artifact: {', '.join(missing)}")


_NEEDS = {
    "baseline": (),
    "nifty_intent": ("intent_classifier",),
    "nifty_action": ("action_classifier",),
    "rerank_intent": ("intent_classifier",),
    "rerank_action": ("action_classifier",),
    "unlikelihood": (),
    "rules": ("intent_classifier",),
}


@dataclass(frozen=True)
class MethodResult:
    rouge_l: float
    r_at_1: float
    n: int
    p_rouge_l: float | None = None
    p_r_at_1: float | None = None


@dataclass
class EvalReport:
    methods: dict[str, MethodResult]
    seed: int
    config: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "methods": {
                m: {
                    "rouge_l": r.rouge_l, "r_at_1": r.r_at_1, "n": r.n,
                    "p_rouge_l": r.p_rouge_l, "p_r_at_1": r.p_r_at_1,
                }
                for m, r in self.methods.items()
            },
            "p_value_convention": P_VALUE_CONVENTION,
            "seed": self.seed,
            "config": self.config,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        """Aligned text table: method, ROUGE-L x100, R@1 %, p-values vs baseline."""
        head = f"{'Method':<18}{'R-L':>8}{'R@1':>8}{'p(R-L)':>10}{'p(R@1)':>10}{'n':>7}"
        lines = [head, "-" * len(head)]
        for m, r in self.methods.items():
            pr = "" if r.p_rouge_l is None else f"{r.p_rouge_l:.4f}"
            p1 = "" if r.p_r_at_1 is None else f"{r.p_r_at_1:.4f}"
            lines.append(
                f"{METHOD_NAMES[m]:<18}{100 * r.rouge_l:>8.1f}{100 * r.r_at_1:>8.1f}{pr:>10}{p1:>10}{r.n:>7}"
            )
        return "\n".join(lines)


def decode_example(models: Models, example: Example, methods: Sequence[str], config: GuidanceConfig, K: int = 3, dedupe_intents: bool = False) -> dict:
    """Run every requested method on one example; returns a JSON-ready trace."""
    vocab = models.lm.vocab
    msg = vocab.decode(example.message)
    sugg = retrieve_suggestions(models.encoder, models.index, example.message, K, dedupe_intents)
    zs = frozenset(sugg.intents)
    trace = {
        "id": example.id,
        "intent": example.intent,
        "suggestions": [
            {"reply": " ".join(vocab.decode(s.reply)), "intent": s.intent, "score": s.score}
            for s in sugg
        ],
        "outputs": {},
    }
    beams = None
    if {"baseline", "rerank_intent", "rerank_action", "rules"} & set(methods):
        beams = beam_search(models.lm, example.message, config)
        trace["beams"] = [
            {"reply": " ".join(vocab.decode(h.reply)), "base_logprob": h.base_logprob}
            for h in beams[: config.beams]
        ]
    target = None
    if {"nifty_intent", "rerank_intent"} & set(methods):
        target = select_target_intent(models.intent_classifier, msg, zs)
        trace["target_intent"] = target
        trace["target_in_suggestions"] = target in zs
    for m in methods:
        cfg = replace(config, method=m)
        if m == "baseline":
            out = beams[0].reply
        elif m == "nifty_intent":
            best = guided_search(models.lm, models.intent_classifier, IntentAttribute(target, zs), example.message, cfg)[0]
            out = best.reply
            trace["nifty_intent_scores"] = {"base": best.base_logprob, "combined": best.combined_logprob}
        elif m == "nifty_action":
            out = guided_search(models.lm, models.action_classifier, ActionAttribute(), example.message, cfg)[0].reply
        elif m == "rerank_intent":
            out = rerank_decode(models.lm, models.intent_classifier, IntentAttribute(target, zs), example.message, cfg, beams)
        elif m == "rerank_action":
            out = rerank_decode(models.lm, models.action_classifier, ActionAttribute(), example.message, cfg, beams)
        elif m == "unlikelihood":
            out = unlikelihood_decode(models.lm, sugg, example.message, cfg)
        elif m == "rules":
            out = rules_decode(models.lm, models.intent_classifier, zs, example.message, cfg, beams)
        else:
            raise ValueError(f"unknown method {m!r}")
        trace["outputs"][m] = list(out)
    return trace


def run_experiment(
    test: Dataset,
    models: Models,
    methods: Sequence[str],
    config: GuidanceConfig,
    *,
    seed: int = 0,
    resamples: int = 10000,
    K: int = 3,
    dedupe_intents: bool = False,
    config_echo: dict | None = None,
) -> tuple[EvalReport, list[dict]]:
    """Decode the (filtered) test split with each method and score it."""
    methods = list(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods: {', '.join(unknown)}")
    models.require("lm", "encoder", "index", "eval_classifier",
                   *itertools.chain.from_iterable(_NEEDS[m] for m in methods))
    if len(test) == 0:
        raise ValueError("empty test set")
    vocab = models.lm.vocab
    examples = sorted(test, key=lambda ex: ex.id)
    traces = [decode_example(models, ex, methods, config, K, dedupe_intents) for ex in examples]

    per_method: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for m in methods:
        outs = [tuple(t["outputs"][m]) for t in traces]
        rl = np.array([rouge_l(o, ex.reply) for o, ex in zip(outs, examples)])
        hits = np.array(intent_hits(outs, examples, models.eval_classifier, vocab), dtype=float)
        per_method[m] = (rl, hits)
        for t, r, h in zip(traces, rl, hits):
            t["outputs"][m] = {
                "reply": " ".join(vocab.decode(t["outputs"][m])),
                "rouge_l": float(r), "hit": bool(h),
            }

    results = {}
    for m in methods:
        rl, hits = per_method[m]
        p_rl = p_r1 = None
        if m != "baseline" and "baseline" in per_method and len(examples) >= 2:
            brl, bhits = per_method["baseline"]
            p_rl = paired_bootstrap(rl, brl, resamples, seed)
            p_r1 = paired_bootstrap(hits, bhits, resamples, seed)
        results[m] = MethodResult(float(rl.mean()), float(hits.mean()), len(examples), p_rl, p_r1)

    diagnostics: dict = {}
    if "target_intent" in traces[0]:
        diagnostics["eq3_violations"] = sum(t["target_in_suggestions"] for t in traces)
        diagnostics["target_intent_accuracy"] = float(np.mean([t["target_intent"] == t["intent"] for t in traces]))
    if "beams" in traces[0]:
        distinct = []
        for t in traces:
            labels = {predict_label(models.eval_classifier, (), r["reply"].split()) for r in t["beams"]}
            distinct.append(len(labels))
        diagnostics["beam_distinct_intents"] = float(np.mean(distinct))
    report = EvalReport(results, seed, config_echo if config_echo is not None else {"guidance": config.to_dict()}, diagnostics)
    return report, traces


@dataclass
class SweepTable:
    rows: dict[float, MethodResult]
    diagnostics: dict[float, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": "nifty_intent",
            "rows": [
                {"alpha": a, "rouge_l": r.rouge_l, "r_at_1": r.r_at_1, "n": r.n}
                for a, r in self.rows.items()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        head = f"{'alpha':<8}{'R-L':>8}{'R@1':>8}"
        lines = [head, "-" * len(head)]
        for a, r in self.rows.items():
            lines.append(f"{a:<8g}{100 * r.rouge_l:>8.1f}{100 * r.r_at_1:>8.1f}")
        return "\n".join(lines)


def sweep_alpha(
    test: Dataset, models: Models, config: GuidanceConfig,
    alphas: Sequence[float] = (0.5, 1.0, 2.0), **kwargs,
) -> SweepTable:
    """NIFTY Intent scored at each guidance weight."""
    alphas = [float(a) for a in alphas]
    if len(set(alphas)) != len(alphas):
        raise ValueError("duplicate alpha values")
    if not alphas:
        raise ValueError("need at least one alpha")
    rows, diags = {}, {}
    for a in alphas:
        report, _ = run_experiment(test, models, ["nifty_intent"], replace(config, alpha=a), **kwargs)
        rows[a] = report.methods["nifty_intent"]
        diags[a] = report.diagnostics
    return SweepTable(rows, diags)


def write_jsonl(path: str | Path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")
