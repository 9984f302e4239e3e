"""Converters from public dialogue exports to (message, reply, intents) JSONL records.

Each user turn followed by a system turn becomes one record; the reply's
intents are the system turn's dialogue acts as "domain-act" strings.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .corpus import DataError


def _load_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def _dialogues(paths: Iterable[str | Path]):
    for path in paths:
        data = _load_json(path)
        if isinstance(data, dict):
            data = [data]
        if not isinstance(data, list):
            raise DataError(f"{path}: expected a list of dialogues")
        yield from data


def _pairs(turns):
    for user, system in zip(turns, turns[1:]):
        if str(user.get("speaker", "")).upper() == "USER" and str(system.get("speaker", "")).upper() == "SYSTEM":
            yield user, system


def sgd_act_labels(turn: dict) -> list[str]:
    """'service-act' labels of an SGD system turn, service domain without the _N suffix."""
    labels = set()
    for frame in turn.get("frames", []):
        domain = frame.get("service", "").split("_")[0].lower()
        for action in frame.get("actions", []):
            labels.add(f"{domain}-{action['act'].lower()}")
    return sorted(labels)


def convert_sgd(paths: Iterable[str | Path]) -> list[dict]:
    records = []
    for dialogue in _dialogues(paths):
        did = dialogue.get("dialogue_id", str(len(records)))
        for k, (user, system) in enumerate(_pairs(dialogue.get("turns", []))):
            intents = sgd_act_labels(system)
            if intents:
                records.append({
                    "id": f"{did}-{k}", "message": user["utterance"],
                    "reply": system["utterance"], "intents": intents,
                })
    return records


def multiwoz_act_labels(act_entry: dict) -> list[str]:
    """Labels from a dialog_acts.json turn entry: keys such as 'Restaurant-Inform'."""
    return sorted({key.lower() for key in act_entry.get("dialog_act", {})})


def convert_multiwoz22(dialogue_paths: Iterable[str | Path], dialog_acts_path: str | Path) -> list[dict]:
    acts = _load_json(dialog_acts_path)
    records = []
    for dialogue in _dialogues(dialogue_paths):
        did = dialogue["dialogue_id"]
        turn_acts = acts.get(did, {})
        for user, system in _pairs(dialogue.get("turns", [])):
            intents = multiwoz_act_labels(turn_acts.get(str(system["turn_id"]), {}))
            if intents:
                records.append({
                    "id": f"{did}-{system['turn_id']}", "message": user["utterance"],
                    "reply": system["utterance"], "intents": intents,
                })
    return records
