#!/usr/bin/env python3
"""Keyframe-budget sweep for transition clip classification.

Builds a chain library per keyframe budget K from simulated training
clips of every (from, to, direction) combination, then classifies
held-out clips and prints accuracy per K.  With --pair-stride the
protocol is thinned by pose pair (both directions of a kept pair stay
in, so direction confusion remains possible).
"""

import argparse

import numpy as np

from posehsmm.errors import NoTransitionDetected
from posehsmm.simulate import (
    CANONICAL_POSES,
    ScenarioConfig,
    sample_transition_clip,
    transition_protocol,
)
from posehsmm.summarize import build_transition_library, classify_transition


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", nargs="+", type=int, default=[2, 3, 5])
    ap.add_argument("--train-seeds", nargs=2, type=int, default=[100, 108],
                    metavar=("LO", "HI"), help="half-open seed range")
    ap.add_argument("--eval-seeds", nargs=2, type=int, default=[1, 2],
                    metavar=("LO", "HI"))
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--threshold", type=float, default=0.25,
                    help="keyframe dissimilarity threshold")
    ap.add_argument("--pair-stride", type=int, default=1)
    args = ap.parse_args(argv)

    def make(combo, seed):
        a, b, d = combo
        cfg = ScenarioConfig(seed=seed, poses=CANONICAL_POSES,
                             scene_doubling=False, noise=args.noise,
                             dropout=0.0)
        return sample_transition_clip(a, b, d, cfg)[0]

    protocol = [
        combo for k, combo in enumerate(transition_protocol())
        if (k // 2) % args.pair_stride == 0
    ]
    print(f"{len(protocol)} combinations, train seeds "
          f"{list(range(*args.train_seeds))}, noise {args.noise}")

    train_clips = [
        (make(c, s), *c) for s in range(*args.train_seeds) for c in protocol
    ]
    eval_clips = {
        (c, s): make(c, s) for s in range(*args.eval_seeds) for c in protocol
    }
    for K in args.k:
        lib = build_transition_library(train_clips, k_max=K,
                                       threshold=args.threshold)
        accs = []
        for s in range(*args.eval_seeds):
            hits = 0
            for combo in protocol:
                try:
                    rec = classify_transition(eval_clips[(combo, s)], lib, K,
                                              args.threshold)
                except NoTransitionDetected:
                    continue
                hits += (rec.from_pose, rec.to_pose, rec.direction) == combo
            accs.append(hits / len(protocol))
        print(f"K={K}: mean accuracy {np.mean(accs):.4f}"
              + (f"  (per-seed {['%.4f' % a for a in accs]})"
                 if len(accs) > 1 else ""))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
