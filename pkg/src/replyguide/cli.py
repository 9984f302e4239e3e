"""Command line: data preparation, training, filtering, evaluation and a demo REPL.

Exit codes: 0 success, 1 usage error, 2 data or artifact error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence, TextIO

from . import pipeline
from .artifacts import ArtifactError
from .classifiers import save_classifier
from .config import ConfigError, RunConfig, load_config, with_overrides
from .convert import convert_multiwoz22, convert_sgd
from .corpus import SPLITS, DataError, tokenize, write_records, split_indices
from .decoding import GuidanceConfig, IntentAttribute, beam_search, nifty_decode, select_target_intent
from .evaluation import MissingArtifact, Models, write_jsonl
from .lm import save_ngram, train_ngram
from .smartreply import retrieve_suggestions, save_retriever


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _csv(cast):
    def parse(text: str):
        try:
            return tuple(cast(x) for x in text.split(",") if x.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _setting(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="replyguide", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--seed", type=int, help="global seed (overrides the config)")
        p.add_argument("--out", help="output directory (defaults come from the config paths)")
        p.add_argument("--set", dest="settings", action="append", type=_setting, default=[],
                       metavar="KEY=VALUE", help="dotted config override, e.g. guidance.beams=3")
        return p

    add("gen-data", "write seeded synthetic train/valid/test JSONL")
    p = add("convert", "convert MultiWOZ 2.2 or SGD dialogues to JSONL splits")
    p.add_argument("--format", required=True, choices=("sgd", "multiwoz22"))
    p.add_argument("--inputs", nargs="+", required=True, help="dialogue JSON files")
    p.add_argument("--dialog-acts", help="MultiWOZ 2.2 dialog_acts.json")
    p.add_argument("--ratios", type=_csv(float), default=(0.8, 0.1, 0.1))
    add("train-lm", "train the n-gram generator on the training split")
    add("train-retriever", "train the dual encoder and build the reply index")
    add("filter", "simulate users and record which examples reject all suggestions")
    add("train-classifiers", "train the intent-prefix, action and evaluation classifiers")
    p = add("eval", "decode the filtered test split and write the report")
    p.add_argument("--methods", type=_csv(str))
    p.add_argument("--alpha", type=float)
    p = add("sweep-alpha", "NIFTY Intent at several guidance weights")
    p.add_argument("--alphas", type=_csv(float))
    add("demo", "interactive loop: suggestions, then generated replies on rejection")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {"seed": args.seed}
    if getattr(args, "methods", None):
        overrides["methods"] = args.methods
    if getattr(args, "alpha", None) is not None:
        overrides["guidance.alpha"] = args.alpha
    if getattr(args, "alphas", None):
        overrides["alphas"] = args.alphas
    for key, value in args.settings:
        overrides[key] = value
    return with_overrides(cfg, **overrides).seeded()


def _dir(args, default: str) -> Path:
    path = Path(args.out or default)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- subcommands -------------------------------------------------------------

def cmd_gen_data(args, cfg: RunConfig) -> None:
    for path in pipeline.write_synthetic(cfg, _dir(args, cfg.paths.data)):
        print(path)


def cmd_convert(args, cfg: RunConfig) -> None:
    if args.format == "sgd":
        records = convert_sgd(args.inputs)
    else:
        if not args.dialog_acts:
            raise UsageError("--dialog-acts is required for multiwoz22")
        records = convert_multiwoz22(args.inputs, args.dialog_acts)
    if not records:
        raise DataError("no (user, system) turn pairs with dialogue acts found")
    try:
        parts = split_indices(len(records), args.ratios, cfg.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _dir(args, cfg.paths.data)
    for split, idx in zip(SPLITS, parts):
        path = out / f"{split}.jsonl"
        write_records(path, [records[i] for i in idx])
        print(path)


def cmd_train_lm(args, cfg: RunConfig) -> None:
    train, _, _ = pipeline.load_data(cfg)
    lm = train_ngram(train, cfg.lm.order, cfg.lm.discount)
    path = pipeline.artifact_path(_dir(args, cfg.paths.artifacts), "lm")
    save_ngram(lm, path)
    print(path)


def cmd_train_retriever(args, cfg: RunConfig) -> None:
    train, _, _ = pipeline.load_data(cfg)
    encoder, index = pipeline.train_retriever(cfg, train)
    path = pipeline.artifact_path(_dir(args, cfg.paths.artifacts), "retriever")
    save_retriever(encoder, index, path)
    print(path)


def cmd_filter(args, cfg: RunConfig) -> None:
    artifacts = Path(cfg.paths.artifacts)
    models = pipeline.load_models(artifacts, ["encoder"])
    out = _dir(args, cfg.paths.artifacts)
    train, valid, test = pipeline.load_data(cfg)
    report = None
    kept = {}
    for data in (train, valid, test):
        filtered, _, rep = pipeline.filter_split(cfg, data, models.encoder, models.index)
        report = rep if report is None else report.merged(rep)
        kept[data.split] = filtered.ids()
    # rejected training ids label the action classifier
    print(pipeline.save_rejected_ids(out, kept["train"]))
    (out / "filtered_ids.json").write_text(json.dumps(kept, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "filter_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out / "filter_report.txt").write_text(report.render() + "\n", encoding="utf-8")
    print(out / "filter_report.json")
    _log(report.render())


def cmd_train_classifiers(args, cfg: RunConfig) -> None:
    artifacts = Path(cfg.paths.artifacts)
    rejected = pipeline.load_rejected_ids(artifacts)
    train, _, _ = pipeline.load_data(cfg)
    out = _dir(args, cfg.paths.artifacts)
    models = pipeline.train_guidance_classifiers(cfg, train, rejected)
    for name, model in zip(("intent_classifier", "action_classifier", "eval_classifier"), models):
        path = pipeline.artifact_path(out, name)
        save_classifier(model, path)
        print(path)


def _filtered_test(cfg: RunConfig, models: Models):
    _, _, test = pipeline.load_data(cfg)
    filtered, _, _ = pipeline.filter_split(cfg, test, models.encoder, models.index)
    if len(filtered) == 0:
        raise DataError("the filtered test split is empty")
    return filtered


def _needed_models(methods) -> list[str]:
    names = ["lm", "encoder", "eval_classifier"]
    if {"nifty_intent", "rerank_intent", "rules"} & set(methods):
        names.append("intent_classifier")
    if {"nifty_action", "rerank_action"} & set(methods):
        names.append("action_classifier")
    return names


def cmd_eval(args, cfg: RunConfig) -> None:
    models = pipeline.load_models(cfg.paths.artifacts, _needed_models(cfg.methods))
    test = _filtered_test(cfg, models)
    report, traces = pipeline.evaluate(cfg, test, models)
    out = _dir(args, cfg.paths.reports)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.render() + "\n", encoding="utf-8")
    write_jsonl(out / "traces.jsonl", traces)
    _log(report.render())
    print(out / "report.json")


def cmd_sweep_alpha(args, cfg: RunConfig) -> None:
    models = pipeline.load_models(cfg.paths.artifacts, _needed_models(["nifty_intent"]))
    test = _filtered_test(cfg, models)
    try:
        table = pipeline.run_sweep(cfg, test, models)
    except ValueError as exc:
        if "duplicate" in str(exc):
            raise UsageError(str(exc)) from exc
        raise
    out = _dir(args, cfg.paths.reports)
    (out / "sweep.json").write_text(table.to_json(), encoding="utf-8")
    (out / "sweep.txt").write_text(table.render() + "\n", encoding="utf-8")
    _log(table.render())
    print(out / "sweep.json")


def cmd_demo(args, cfg: RunConfig) -> None:
    models = pipeline.load_models(cfg.paths.artifacts, ["lm", "encoder", "intent_classifier"])
    demo_repl(models, cfg, sys.stdin, sys.stdout)


def demo_repl(models: Models, cfg: RunConfig, stdin: TextIO, stdout: TextIO) -> int:
    """Message in, K suggestions out; on rejection show Baseline and NIFTY Intent replies."""
    vocab = models.lm.vocab
    guidance: GuidanceConfig = cfg.guidance
    K = cfg.retriever.k

    def say(text=""):
        print(text, file=stdout, flush=True)

    def ask(prompt):
        stdout.write(prompt)
        stdout.flush()
        line = stdin.readline()
        return None if line == "" else line.strip()

    say("type a message (q to quit)")
    while True:
        line = ask("message> ")
        if line is None or line == "q":
            return 0
        tokens = tokenize(line)
        if not tokens:
            continue
        message = vocab.encode(tokens)
        sugg = retrieve_suggestions(models.encoder, models.index, message, K, cfg.retriever.dedupe_intents)
        for i, s in enumerate(sugg, 1):
            say(f"  {i}. {' '.join(vocab.decode(s.reply))}  [{s.intent}]")
        while True:
            choice = ask(f"pick 1-{K}, r to reject all, q to quit> ")
            if choice is None or choice == "q":
                return 0
            if choice == "r":
                break
            if choice.isdigit() and 1 <= int(choice) <= K:
                say(f"sent: {' '.join(vocab.decode(sugg.entries[int(choice) - 1].reply))}")
                break
            say("invalid choice")
        if choice != "r":
            continue
        zs = frozenset(sugg.intents)
        target = select_target_intent(models.intent_classifier, vocab.decode(message), zs)
        assert target not in zs
        base = beam_search(models.lm, message, replace(guidance, method="baseline"))[0].reply
        guided = nifty_decode(
            models.lm, models.intent_classifier, IntentAttribute(target, zs), message,
            replace(guidance, method="nifty_intent"),
        )
        say(f"  baseline      : {' '.join(vocab.decode(base))}")
        say(f"  nifty [{target}] : {' '.join(vocab.decode(guided))}")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "convert": cmd_convert,
    "train-lm": cmd_train_lm,
    "train-retriever": cmd_train_retriever,
    "filter": cmd_filter,
    "train-classifiers": cmd_train_classifiers,
    "eval": cmd_eval,
    "sweep-alpha": cmd_sweep_alpha,
    "demo": cmd_demo,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        cfg = resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        _log(str(exc))
        return 1
    except (DataError, ArtifactError, MissingArtifact, FileNotFoundError, ValueError) as exc:
        _log(f"error: {exc}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
