"""Run the Monte-Carlo lemma checks and print one table per check.

    python3 scripts/lemma_checks.py [--quick] [--seed 0]

Exits non-zero if any check fails.
"""

import argparse
import sys

from netnorm.oracle import run_lemma_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    results = run_lemma_suite(seed=args.seed, quick=args.quick)
    for r in results:
        print(f"== {r.name}: {'pass' if r.passed else 'FAIL'}")
        for row in r.rows[:12]:
            print("   " + "  ".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row))
        if len(r.rows) > 12:
            print(f"   ... {len(r.rows) - 12} more rows")
    sys.exit(0 if all(r.passed for r in results) else 1)


if __name__ == "__main__":
    main()
