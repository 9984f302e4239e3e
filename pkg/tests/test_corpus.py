import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from replyguide.corpus import (
    BOS, EOS, PAD, RESERVED, SEP, UNK,
    DataError, IntentCatalog, build_vocab, composite_intent, datasets_from_records,
    intent_parts, load_dataset, read_records, split_dataset, tokenize, write_records,
)

words = st.text(alphabet="abcxyz", min_size=1, max_size=4)


def test_reserved_ids():
    assert (PAD, UNK, BOS, EOS, SEP) == (0, 1, 2, 3, 4)
    assert RESERVED == ("<pad>", "<unk>", "<s>", "</s>", "<sep>")


def test_tokenize_splits_punctuation_and_lowercases():
    assert tokenize("Hi, I need a Taxi!") == ["hi", ",", "i", "need", "a", "taxi", "!"]
    assert tokenize("   ") == []


@given(st.lists(st.sampled_from(["a", "b", "c", ",", "?", "."]), max_size=12))
def test_tokenize_round_trips_space_joined_tokens(tokens):
    assert tokenize(" ".join(tokens)) == tokens


def test_vocab_order_is_frequency_then_lexicographic():
    v = build_vocab([["b", "a", "c"], ["a", "c"], ["c"]])
    assert v.tokens[len(RESERVED):] == ("c", "a", "b")


def test_vocab_min_count_maps_rare_tokens_to_unk():
    v = build_vocab([["a", "b"], ["a", "c"]], min_count=2)
    assert v.tokens[len(RESERVED):] == ("a",)
    assert v.encode(["a", "b", "c"]) == (v.id("a"), UNK, UNK)


def test_vocab_rejects_empty_corpus():
    with pytest.raises(DataError, match="empty corpus"):
        build_vocab([])


@given(st.lists(st.lists(words, min_size=1, max_size=5), min_size=1, max_size=6))
def test_vocab_ids_are_a_pure_function_of_the_corpus(texts):
    a, b = build_vocab(texts), build_vocab(list(reversed(texts)))
    assert a.tokens == b.tokens
    for toks in texts:
        assert a.decode(a.encode(toks)) == toks


@given(st.sets(words, min_size=1, max_size=4))
def test_composite_intent_is_order_free(parts):
    label = composite_intent(parts)
    assert label == composite_intent(sorted(parts, reverse=True))
    assert intent_parts(label) == sorted(parts)


def test_composite_intent_examples():
    assert composite_intent(["hotel-book", "general-reqmore"]) == "general-reqmore+hotel-book"
    with pytest.raises(ValueError):
        composite_intent([])


def test_catalog_needs_two_labels():
    with pytest.raises(DataError):
        IntentCatalog(("only",))
    cat = IntentCatalog.from_labels(["b", "a", "b"])
    assert cat.labels == ("a", "b") and cat.index("b") == 1


def _write(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def test_read_records_names_the_bad_line(tmp_path):
    p = tmp_path / "d.jsonl"
    _write(p, [{"id": "1", "message": "hi", "reply": "yo", "intents": ["a"]},
               {"id": "2", "message": "hi", "intents": ["a"]}])
    with pytest.raises(DataError, match="line 2: missing field reply"):
        read_records(p)


def test_read_records_rejects_bad_intents(tmp_path):
    p = tmp_path / "d.jsonl"
    _write(p, [{"id": "1", "message": "hi", "reply": "yo", "intents": []}])
    with pytest.raises(DataError, match="line 1"):
        read_records(p)


def test_load_dataset_round_trip_and_skips_empty(tmp_path):
    rows = [
        {"id": "1", "message": "I need a taxi", "reply": "where to ?", "intents": ["taxi-request"]},
        {"id": "2", "message": "book it", "reply": "done .", "intents": ["taxi-book", "general-reqmore"]},
        {"id": "3", "message": "...", "reply": "", "intents": ["taxi-book"]},
    ]
    p = tmp_path / "d.jsonl"
    write_records(p, rows)
    ds = load_dataset(p)
    assert len(ds) == 2 and ds.meta["skipped_empty"] == 1
    assert ds.examples[1].intent == "general-reqmore+taxi-book"
    assert ds.vocab.decode(ds.examples[0].message) == ["i", "need", "a", "taxi"]


def test_vocab_from_train_catalog_from_all_splits():
    def rec(i, m, r, intent):
        return {"id": i, "message": m, "reply": r, "intents": [intent]}

    train, _, test = datasets_from_records({
        "train": [rec("1", "a b", "c", "x"), rec("2", "a", "c", "y")],
        "valid": [rec("3", "a", "c", "x")],
        "test": [rec("4", "zzz a", "c", "z")],
    })
    assert test.examples[0].message[0] == UNK
    assert "zzz" not in train.vocab.tokens
    assert train.catalog.labels == ("x", "y", "z")


@given(st.integers(0, 60), st.integers(0, 2**32 - 1))
def test_split_dataset_partitions(n, seed):
    rec = [{"id": str(i), "message": f"m {i}", "reply": "r", "intents": ["a" if i % 2 else "b"]} for i in range(max(n, 2))]
    train, _, _ = datasets_from_records({"train": rec, "valid": [], "test": []})
    parts = split_dataset(train, (0.6, 0.2, 0.2), seed)
    ids = [i for p in parts for i in p.ids()]
    assert sorted(ids) == sorted(train.ids())
    assert parts == split_dataset(train, (0.6, 0.2, 0.2), seed)


def test_split_dataset_validates_ratios(small_train):
    with pytest.raises(ValueError):
        split_dataset(small_train, (0.5, 0.5, 0.5), 0)
