"""Time naive, numpy and numba window detection on random tag sequences.

    python3 benchmarks/bench_detect.py --length 4096 --repeat 20
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from patternmark import _kernels
from patternmark.detection import edit_statistics, matcher_for
from patternmark.generation import RandomLogitModel
from patternmark.pattern import parse_pattern, valid_windows


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    backends = ["numpy"] + (["numba"] if _kernels.HAS_NUMBA else [])
    print(f"{'pattern':<18} {'w':>3} {'mode':<9} {'naive':>10} " + " ".join(f"{b:>10}" for b in backends))
    for spec, w in (("AB", 2), ("ACADBCBD", 8), ("ACADBCBD", 24), ("ABCDEFGHIJKLMNOP", 17)):
        p = parse_pattern(spec)
        ws = valid_windows(p, w)
        m = matcher_for(ws)
        tags = rng.integers(0, p.r, args.length)
        for b in backends:
            m.edit_scores(tags, b)  # compile
        naive = best_of(lambda: edit_statistics(tags, w, ws), max(1, args.repeat // 10))
        fast = [best_of(lambda: m.edit_scores(tags, b), args.repeat) for b in backends]
        print(f"{spec:<18} {w:>3} {m.mode:<9} {naive * 1e3:>8.2f}ms " + " ".join(f"{t * 1e3:>8.3f}ms" for t in fast))

    # logit hashing dominates toy generation
    model = RandomLogitModel(32_000, 0.07, args.seed)
    h = np.uint64(model.context_hash([1, 2, 3]))
    row = [best_of(lambda: _kernels.kernels(b)["hash_noise"](h, model.vocab_size), args.repeat) for b in backends]
    print(f"{'logits':<18} {'':>3} {'V=32000':<9} {'':>10} " + " ".join(f"{t * 1e3:>8.3f}ms" for t in row))


if __name__ == "__main__":
    main()
