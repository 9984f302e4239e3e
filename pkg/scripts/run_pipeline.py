"""Train everything in memory on the synthetic corpus and print the method table.

    python3 scripts/run_pipeline.py --seed 0 --out reports/seed0
"""
import argparse
import time
from pathlib import Path

from replyguide.config import load_config, with_overrides
from replyguide.evaluation import write_jsonl
from replyguide.pipeline import run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="write report.json, report.txt, traces.jsonl and filter_report.txt here")
    args = ap.parse_args()

    cfg = with_overrides(load_config(args.config), seed=args.seed)
    t0 = time.perf_counter()
    res = run_pipeline(cfg)
    took = time.perf_counter() - t0

    print(res.filter_report.render())
    print()
    print(res.report.render())
    print()
    for k, v in sorted(res.report.diagnostics.items()):
        print(f"{k}: {v:.3f}" if isinstance(v, float) else f"{k}: {v}")
    print(f"pipeline seconds: {took:.1f}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(res.report.to_json())
        (out / "report.txt").write_text(res.report.render() + "\n")
        (out / "filter_report.txt").write_text(res.filter_report.render() + "\n")
        write_jsonl(out / "traces.jsonl", res.traces)


if __name__ == "__main__":
    main()
