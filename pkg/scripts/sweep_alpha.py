"""NIFTY Intent R-L and R@1 at several guidance weights, optionally over several seeds.

    python3 scripts/sweep_alpha.py --alphas 0.5,1,2 --seeds 0,1
"""
import argparse

from replyguide.config import RunConfig, with_overrides
from replyguide.pipeline import run_pipeline, run_sweep


def floats(text):
    return tuple(float(x) for x in text.split(","))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=floats, default=(0.5, 1.0, 2.0))
    ap.add_argument("--seeds", default="0")
    args = ap.parse_args()

    for seed in (int(s) for s in args.seeds.split(",")):
        cfg = with_overrides(RunConfig(), seed=seed, alphas=args.alphas, methods=("nifty_intent",))
        res = run_pipeline(cfg)
        table = run_sweep(cfg, res.test_filtered, res.models)
        print(f"seed {seed}  (n={len(res.test_filtered)})")
        print(table.render())
        print()


if __name__ == "__main__":
    main()
