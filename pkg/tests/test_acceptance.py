"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary. The full default pipeline is shared between criteria.
"""
import math
import time

import numpy as np
import pytest
import scipy.sparse as sp

from replyguide.classifiers import softmax_loss_and_grad
from replyguide.config import RunConfig
from replyguide.corpus import EOS
from replyguide.decoding import GuidanceConfig, IntentAttribute, beam_search, guided_search, nifty_decode
from replyguide.evaluation import rouge_l
from replyguide.features import ColumnMap
from replyguide.lm import train_ngram
from replyguide.pipeline import filter_split, run_pipeline, run_sweep, synthetic_splits
from replyguide.simulator import simulate_user
from replyguide.smartreply import in_batch_loss_and_grad, retrieve_suggestions

from oracles import exhaustive_lcs_mismatches
from test_lm import corpus
from toys import TableLM, brute_force_best, random_classifier

RESULTS: list[str] = []
RUNTIME_BUDGET_S = 300.0


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def run():
    cfg = RunConfig()
    start = time.perf_counter()
    result = run_pipeline(cfg)
    return cfg, result, time.perf_counter() - start


def test_criterion_01_main_direction(run):
    _, result, seconds = run
    m = result.report.methods
    base, intent, action = m["baseline"], m["nifty_intent"], m["nifty_action"]
    gap = 100 * (intent.r_at_1 - base.r_at_1)
    ordered = intent.r_at_1 >= action.r_at_1 >= base.r_at_1
    ok = gap >= 15 and ordered and intent.p_r_at_1 < 0.05 and seconds < RUNTIME_BUDGET_S
    report(1, ok, (
        f"R@1 baseline {100 * base.r_at_1:.1f}, nifty_action {100 * action.r_at_1:.1f}, "
        f"nifty_intent {100 * intent.r_at_1:.1f} (gap {gap:.1f} >= 15), p={intent.p_r_at_1:.4f}, "
        f"pipeline {seconds:.0f}s < {RUNTIME_BUDGET_S:.0f}s"
    ))


def test_criterion_02_rouge_non_inferior(run):
    m = run[1].report.methods
    b, i = m["baseline"].rouge_l, m["nifty_intent"].rouge_l
    report(2, i >= b, f"ROUGE-L nifty_intent {100 * i:.2f} >= baseline {100 * b:.2f}")


def test_criterion_03_alpha_zero_reduction(run):
    cfg, result, _ = run
    g = GuidanceConfig(alpha=0.0)
    models = result.models
    examples = sorted(result.test_filtered, key=lambda e: e.id)[:100]
    same = 0
    for ex in examples:
        base = beam_search(models.lm, ex.message, g)[0].reply
        z = models.intent_classifier.classes[0]
        same += nifty_decode(models.lm, models.intent_classifier, IntentAttribute(z), ex.message, g) == base
    report(3, len(examples) == 100 and same == 100, f"{same}/{len(examples)} identical")


def toy_instances(n=50, seed=0):
    """The fixed instance distribution: V = words + EOS in {3, 4, 5}, max_len in {1, 2, 3}."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        V = int(rng.integers(3, 6))
        max_len = int(rng.integers(1, 4))
        yield V, max_len, int(rng.integers(2**31)), int(rng.integers(2**31))


def test_criterion_04_small_instance_optimality():
    bad_beam = bad_guided = 0
    for V, max_len, lm_seed, clf_seed in toy_instances():
        lm = TableLM(V - 1, lm_seed)
        msg = (5,)
        clf = random_classifier(lm.vocab, lm.vocab.decode(msg), ("x", "y", "z"), clf_seed)
        g = GuidanceConfig(beams=V, top_k_rescore=V, max_len=max_len, alpha=1.0)
        bad_beam += beam_search(lm, msg, g)[0].tokens != brute_force_best(lm, msg, max_len)
        guided = guided_search(lm, clf, IntentAttribute("x"), msg, g)[0].tokens
        bad_guided += guided != brute_force_best(lm, msg, max_len, clf, 0, 1.0)
    report(4, bad_beam == 0 and bad_guided == 0,
           f"beam {50 - bad_beam}/50, guided {50 - bad_guided}/50 equal to enumeration argmax")


def scan_intents(encoder, index, message, K):
    """Top-K intents by a direct dot-product scan; ties go to the earlier index entry."""
    q = encoder.embed_messages([index.vocab.decode(message)])[0]
    scores = index.embeddings @ q
    order = np.lexsort((np.arange(len(scores)), -scores))[:K]
    return {index.intents[i] for i in order}


def test_criterion_05_simulator(run):
    cfg, result, _ = run
    models = result.models
    mismatches = count_errors = total = 0
    for data in synthetic_splits(cfg):
        filtered, rejected, rep = filter_split(cfg, data, models.encoder, models.index)
        brute = {ex.id for ex in data if ex.intent not in scan_intents(models.encoder, models.index, ex.message, cfg.retriever.k)}
        mismatches += len(brute ^ rejected) + len(brute ^ set(filtered.ids()))
        c = rep.splits[data.split]
        count_errors += (c.pre != len(data)) + (c.post != len(brute))
        total += len(data)
        for ex in data.examples[:50]:
            sugg = retrieve_suggestions(models.encoder, models.index, ex.message, cfg.retriever.k)
            mismatches += simulate_user(ex, sugg).rejected != (ex.id in brute)
    text = result.filter_report.render().splitlines()
    layout = "Pre-filtering" in text[0] and "Post-filtering" in text[0] and text[-1].startswith("# Intents")
    layout &= [l.split()[0] for l in text[2:4]] == ["Train", "Test"]
    ok = mismatches == 0 and count_errors == 0 and layout
    report(5, ok, f"{total} examples, {mismatches} membership mismatches, {count_errors} count errors, layout ok={layout}")


def test_criterion_06_eq3_mask(run):
    _, result, _ = run
    violations = sum(
        t["target_intent"] in {s["intent"] for s in t["suggestions"]} for t in result.traces
    )
    diag = result.report.diagnostics["eq3_violations"]
    report(6, violations == 0 and diag == 0, f"{violations} violations over {len(result.traces)} decodes")


def test_criterion_07_metric_oracles():
    bad, pairs = exhaustive_lcs_mismatches(3, 8)
    exact = rouge_l("the cat sat".split(), "the cat".split()) == 0.8
    rng = np.random.default_rng(7)
    ident = sum(rouge_l(x, x) == 1.0 for x in (rng.integers(0, 20, rng.integers(1, 30)).tolist() for _ in range(100)))
    report(7, bad == 0 and exact and ident == 100,
           f"LCS {pairs} pairs, {bad} mismatches; rouge 0.8 exact={exact}; rouge(x,x)=1 for {ident}/100")


def central_difference(f, x, idx, h=1e-5):
    old = x[idx]
    x[idx] = old + h
    up = f()
    x[idx] = old - h
    down = f()
    x[idx] = old
    return (up - down) / (2 * h)


def test_criterion_08_classifier_numerics():
    rng = np.random.default_rng(8)
    vectors = [{int(k): int(rng.integers(1, 3)) for k in rng.choice(40, size=4, replace=False)} for _ in range(30)]
    y = rng.integers(0, 4, 30)
    X = ColumnMap.fit(vectors).matrix(vectors)
    W, b = rng.normal(size=(X.shape[1], 4)), rng.normal(size=4)
    _, gW, gb = softmax_loss_and_grad(W, b, X, y, 1e-3)
    loss = lambda: softmax_loss_and_grad(W, b, X, y, 1e-3)[0]
    worst = 0.0
    for k in range(20):
        # every fifth coordinate is a bias entry
        target, grad = (b, gb) if k % 5 == 4 else (W, gW)
        idx = tuple(int(rng.integers(n)) for n in target.shape)
        fd, analytic = central_difference(loss, target, idx), grad[idx]
        worst = max(worst, abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-8))
    Xm, Xr = rng.random((6, 5)), rng.random((6, 5))
    Pm, Pr = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    _, gm, _ = in_batch_loss_and_grad(Xm, Xr, Pm, Pr)
    for _ in range(5):
        idx = (int(rng.integers(5)), int(rng.integers(3)))
        fd = central_difference(lambda: in_batch_loss_and_grad(Xm, Xr, Pm, Pr)[0], Pm, idx)
        worst = max(worst, abs(fd - gm[idx]) / max(abs(fd), abs(gm[idx]), 1e-8))
    zero_c = max(
        abs(softmax_loss_and_grad(np.zeros((X.shape[1], c)), np.zeros(c), X, y % c, 0.1)[0] - math.log(c))
        for c in (2, 4, 12)
    )
    zero_b = max(
        abs(in_batch_loss_and_grad(rng.random((B, 5)), rng.random((B, 5)), np.zeros((5, 3)), np.zeros((5, 3)))[0] - math.log(B))
        for B in (2, 8, 32)
    )
    ok = worst < 1e-4 and zero_c <= 1e-12 and zero_b <= 1e-12
    report(8, ok, f"max rel grad error {worst:.2e}; |loss - ln C| {zero_c:.1e}; |loss - ln B| {zero_b:.1e}")


def test_criterion_09_lm_normalization(run):
    lm = run[1].models.lm
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        ctx = rng.integers(2, lm.V, size=int(rng.integers(1, 8))).tolist()
        worst = max(worst, abs(np.exp(lm.next_token_logprobs(ctx)).sum() - 1.0))
    toy = corpus([("q", "a b")] * 3 + [("q", "a c")])
    m = train_ngram(toy, order=2, discount=0.0)
    p = m.next_token_probs([m.vocab.id("a")])
    exact = p[m.vocab.id("b")] == 0.75 and p[m.vocab.id("c")] == 0.25
    report(9, worst <= 1e-9 and exact, f"max |sum - 1| {worst:.1e} over 100 contexts; d=0 ratios exact={exact}")


def test_criterion_10_alpha_sweep(run):
    cfg, result, _ = run
    table = run_sweep(cfg, result.test_filtered, result.models)
    rows = table.rows
    text = table.render().splitlines()
    layout = len(rows) == 3 and len(text) == 5 and text[0].split() == ["alpha", "R-L", "R@1"]
    trend = rows[2.0].r_at_1 >= rows[0.5].r_at_1 - 0.01
    summary = ", ".join(f"a={a:g} R@1 {100 * r.r_at_1:.1f} R-L {100 * r.rouge_l:.1f}" for a, r in rows.items())
    report(10, layout and trend, summary)


def test_criterion_11_determinism(run):
    cfg, result, _ = run
    again = run_pipeline(cfg)
    same = again.report.to_json().encode() == result.report.to_json().encode()
    report(11, same, f"report JSON {len(result.report.to_json())} bytes, identical={same}")
