import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from replyguide.features import (
    N_BUCKETS, ColumnMap, bucket, featurize, featurize_text, featurize_utterance, fnv1a_64,
)

words = st.lists(st.sampled_from(["a", "b", "c", "hotel", "ok", "é"]), min_size=1, max_size=8)


def test_fnv1a_reference_vectors():
    # published 64-bit FNV-1a test vectors
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_bucket_range_and_stability():
    assert bucket("m:hello") == fnv1a_64(b"m:hello") % N_BUCKETS
    assert 0 <= bucket("p:x") < N_BUCKETS


def test_featurize_counts_unigrams_bigrams_and_length():
    v = featurize(["a", "b"], ["c"])
    want = {}
    for s in ["m:a", "m:b", "m:a b", "p:c", "len:0"]:
        want[bucket(s)] = want.get(bucket(s), 0) + 1
    assert v == dict(sorted(want.items()))


def test_length_bucket_changes_every_five_tokens():
    assert bucket("len:0") in featurize(["a"], ["b"] * 4)
    assert bucket("len:1") in featurize(["a"], ["b"] * 5)


def test_empty_message_rejected():
    import pytest
    with pytest.raises(ValueError):
        featurize([], ["a"])


@given(words, words)
def test_total_count_is_feature_string_count(m, p):
    v = featurize(m, p)
    assert sum(v.values()) == 2 * len(m) - 1 + 2 * len(p) - 1 + 1
    assert sum(featurize_utterance(p).values()) == 2 * len(p)
    assert sum(featurize_text(m).values()) == 2 * len(m) - 1


@given(st.lists(st.dictionaries(st.integers(0, 50), st.integers(1, 3), max_size=6), min_size=1, max_size=6))
def test_column_map_matrix_matches_lookup(vectors):
    cm = ColumnMap.fit(vectors[:-1] or [{}])
    X = cm.matrix(vectors).toarray()
    for row, v in zip(X, vectors):
        cols, vals = cm.lookup(v)
        dense = np.zeros(len(cm))
        dense[cols] = vals
        np.testing.assert_array_equal(row, dense)
        # unseen buckets are dropped
        assert row.sum() == sum(c for b, c in v.items() if b in set(cm.buckets.tolist()))
