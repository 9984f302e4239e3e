"""How often width-V beam search misses the exhaustive optimum on toy tables.

Width V is only provably exact up to two steps; this measures the miss rate
at three steps for a few Dirichlet concentrations. Needs the tests/ helpers.

    python3 scripts/beam_exactness.py --n 1000
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from toys import TableLM, brute_force_best, random_classifier  # noqa: E402

from replyguide.decoding import GuidanceConfig, IntentAttribute, beam_search, guided_search  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--words", type=int, default=4)
    ap.add_argument("--max-len", type=int, default=3)
    ap.add_argument("--concentrations", default="0.3,1,3")
    args = ap.parse_args()

    V = args.words + 1
    g = GuidanceConfig(beams=V, top_k_rescore=V, max_len=args.max_len)
    msg = (5,)
    for conc in (float(c) for c in args.concentrations.split(",")):
        rng = np.random.default_rng(0)
        miss_b = miss_g = 0
        for _ in range(args.n):
            lm = TableLM(args.words, int(rng.integers(2**31)), conc)
            clf = random_classifier(lm.vocab, lm.vocab.decode(msg), ("x", "y", "z"), int(rng.integers(2**31)))
            miss_b += beam_search(lm, msg, g)[0].tokens != brute_force_best(lm, msg, args.max_len)
            got = guided_search(lm, clf, IntentAttribute("x"), msg, g)[0].tokens
            miss_g += got != brute_force_best(lm, msg, args.max_len, clf, 0, 1.0)
        print(f"dirichlet {conc:g}: beam misses {miss_b}/{args.n}, guided misses {miss_g}/{args.n}")


if __name__ == "__main__":
    main()
