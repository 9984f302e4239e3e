import sys

import pytest
from hypothesis import HealthCheck, settings

from replyguide.classifiers import (
    TrainConfig,
    train_action_classifier,
    train_eval_intent_classifier,
    train_intent_prefix_classifier,
)
from replyguide.evaluation import Models
from replyguide.lm import train_ngram
from replyguide.simulator import build_filtered_dataset
from replyguide.smartreply import RetrieverConfig, build_reply_index, train_dual_encoder
from replyguide.synthetic import SyntheticSpec, generate_synthetic

settings.register_profile(
    "repo", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

SMALL = SyntheticSpec(n_train=400, n_valid=40, n_test=80, seed=7)


@pytest.fixture(scope="session")
def small_splits():
    return generate_synthetic(SMALL)


@pytest.fixture(scope="session")
def small_train(small_splits):
    return small_splits[0]


@pytest.fixture(scope="session")
def small_models(small_splits):
    train, _, test = small_splits
    fast = TrainConfig(epochs=4)
    lm = train_ngram(train)
    encoder = train_dual_encoder(train, RetrieverConfig(epochs=4))
    index = build_reply_index(encoder, train)
    _, rejected, _ = build_filtered_dataset(train, encoder, index)
    test_f, _, _ = build_filtered_dataset(test, encoder, index)
    models = Models(
        lm, encoder, index,
        train_intent_prefix_classifier(train, fast),
        train_action_classifier(train, rejected, fast),
        train_eval_intent_classifier(train, fast, seed=1),
    )
    return models, test_f, rejected


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
