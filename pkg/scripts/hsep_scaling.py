"""Estimate-versus-oracle gap and cost as the net parameter k grows.

    python3 scripts/hsep_scaling.py [--instances 5] [--n 3] [--ks 10 20 40 60]

For random one-way LOCC measurements on C^2 (x) C^2, prints one row per k:
the worst gap to the alternating-maximization oracle, the guaranteed gap,
the net size and the mean wall time per instance.
"""

import argparse
import time

from netnorm import rng
from netnorm.algorithms import hsep_basic
from netnorm.oracle import hsep_alternating, random_locc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=5)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--ks", type=int, nargs="+", default=[10, 20, 40, 60])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cases = []
    for i in range(args.instances):
        m = random_locc(rng.stream(args.seed + i, "scaling"), args.n, 2, 2)
        cases.append((m, hsep_alternating(m.operator(), 2, 2, restarts=50, seed=i)[0]))

    print(f"{'k':>4} {'net':>8} {'worst gap':>10} {'guarantee':>10} {'sec/inst':>9}")
    for k in args.ks:
        gaps, t0 = [], time.perf_counter()
        for i, (m, oracle) in enumerate(cases):
            rep = hsep_basic(m, k=k, seed=i)
            gaps.append(oracle - rep.value)
        dt = (time.perf_counter() - t0) / len(cases)
        print(f"{k:>4} {rep.stats.net_size:>8} {max(gaps):>10.4f} {rep.attained_delta:>10.4f} {dt:>9.2f}")


if __name__ == "__main__":
    main()
