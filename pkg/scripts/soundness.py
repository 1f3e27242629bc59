#!/usr/bin/env python3
"""Randomized soundness experiments for safety, reuse, skipping and the prover."""
import argparse
import sys

from pbds.experiments import prover_suite, reuse_suite, safety_suite, skipping_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", type=int, default=1000, help="qualifying cases per plan suite")
    ap.add_argument("--formulas", type=int, default=10_000, help="implications for the prover suite")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    results = [
        safety_suite(args.cases, seed=args.seed),
        reuse_suite(args.cases, seed=args.seed),
        skipping_suite(args.cases, seed=args.seed),
        prover_suite(args.formulas, seed=args.seed),
    ]
    for r in results:
        print(r.summary())
        for ex in r.examples:
            print("   ", ex)
    return 1 if any(r.violations for r in results) else 0


if __name__ == "__main__":
    sys.exit(main())
