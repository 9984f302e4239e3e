"""Scripted user: accept a suggestion only on an exact intent match, else reject all."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .corpus import Dataset, Example
from .smartreply import DualEncoder, ReplyIndex, SuggestionSet, retrieve_suggestions


@dataclass(frozen=True)
class UserDecision:
    accepted: int | None  # index into the suggestion set, None = reject all

    @property
    def rejected(self) -> bool:
        return self.accepted is None


REJECT_ALL = UserDecision(None)


def simulate_user(example: Example, suggestions: SuggestionSet) -> UserDecision:
    # composite labels must match exactly; partial overlap is a rejection
    for i, s in enumerate(suggestions):
        if s.intent == example.intent:
            return UserDecision(i)
    return REJECT_ALL


@dataclass(frozen=True)
class SplitCounts:
    pre: int
    post: int

    @property
    def rate(self) -> float:
        return self.post / self.pre if self.pre else 0.0


@dataclass(frozen=True)
class FilterReport:
    splits: dict[str, SplitCounts]
    n_intents: int

    def __post_init__(self):
        for name, c in self.splits.items():
            if c.post > c.pre:
                raise ValueError(f"{name}: post-filter count exceeds pre-filter count")

    def merged(self, other: FilterReport) -> FilterReport:
        return FilterReport({**self.splits, **other.splits}, self.n_intents)

    def to_dict(self) -> dict:
        return {
            "n_intents": self.n_intents,
            "splits": {k: {**asdict(v), "rate": v.rate} for k, v in self.splits.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render(self) -> str:
        names = {"train": "Train size", "valid": "Validation size", "test": "Test size"}
        rows = [("", "Pre-filtering", "Post-filtering")]
        for key, label in names.items():
            if key in self.splits:
                c = self.splits[key]
                rows.append((label, str(c.pre), str(c.post)))
        w0 = max(len(r[0]) for r in rows) + 2
        lines = [f"{r[0]:<{w0}}{r[1]:>15}{r[2]:>16}" for r in rows]
        rule = "-" * len(lines[0])
        lines.insert(1, rule)
        lines.append(rule)
        lines.append(f"{'# Intents':<{w0}}{self.n_intents:>31}")
        return "\n".join(lines)


def build_filtered_dataset(
    dataset: Dataset, encoder: DualEncoder, index: ReplyIndex, K: int = 3,
    dedupe_intents: bool = False,
) -> tuple[Dataset, set[str], FilterReport]:
    """Keep exactly the examples whose user rejects all K suggestions."""
    rejected = []
    for ex in dataset:
        sugg = retrieve_suggestions(encoder, index, ex.message, K, dedupe_intents)
        if simulate_user(ex, sugg).rejected:
            rejected.append(ex.id)
    filtered = dataset.subset(rejected)
    filtered.meta["filtered"] = True
    report = FilterReport(
        {dataset.split: SplitCounts(len(dataset), len(filtered))}, len(dataset.catalog)
    )
    return filtered, set(rejected), report
