import pytest

from replyguide.corpus import Example
from replyguide.simulator import FilterReport, SplitCounts, build_filtered_dataset, simulate_user
from replyguide.smartreply import Suggestion, SuggestionSet, retrieve_suggestions


def sugg(*intents):
    return SuggestionSet(tuple(Suggestion((5,), z, 1.0 - i) for i, z in enumerate(intents)))


def ex(intent):
    return Example("e", (5,), (6,), intent)


def test_accepts_first_exact_match():
    assert simulate_user(ex("b"), sugg("a", "b", "b")).accepted == 1


def test_rejects_without_match():
    assert simulate_user(ex("d"), sugg("a", "b", "c")).rejected


def test_composite_needs_exact_match():
    assert simulate_user(ex("a+b"), sugg("a", "b", "c")).rejected
    assert simulate_user(ex("a"), sugg("a+b", "c", "d")).rejected
    assert simulate_user(ex("a+b"), sugg("c", "a+b", "d")).accepted == 1


def test_filtered_set_is_exactly_the_rejections(small_models, small_splits):
    models, _, _ = small_models
    test = small_splits[2]
    filtered, rejected, report = build_filtered_dataset(test, models.encoder, models.index)
    assert filtered.ids() == [e.id for e in test if e.id in rejected]
    for e in test:
        s = retrieve_suggestions(models.encoder, models.index, e.message, 3)
        assert (e.intent not in s.intents) == (e.id in rejected)
    for e in filtered:
        assert e.intent not in retrieve_suggestions(models.encoder, models.index, e.message, 3).intents
    c = report.splits["test"]
    assert c.pre == len(test) and c.post == len(filtered) <= c.pre
    assert filtered.meta["filtered"] is True


def test_report_rendering_and_validation():
    r = FilterReport({"train": SplitCounts(10, 4), "test": SplitCounts(5, 2)}, 12)
    text = r.render()
    assert "Train size" in text and "Test size" in text and "# Intents" in text
    assert r.to_dict()["splits"]["train"]["rate"] == 0.4
    with pytest.raises(ValueError):
        FilterReport({"train": SplitCounts(1, 2)}, 3)
