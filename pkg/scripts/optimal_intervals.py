#!/usr/bin/env python3
"""Which sketch size is cheapest for a given number of future runs.

Per-run costs are measured on the synthetic database: one plain run, plus
capture and reuse cost for several fragment counts.  Pass --costs FILE
(JSON with keys nops, cap, use) to tabulate externally measured costs instead.
"""
import argparse
import json

from pbds.capture import capture
from pbds.partition import Stats, build_equi_depth
from pbds.reuse import Template, instantiate
from pbds.skipping import run_skipping
from pbds.tuning import SYNTHETIC_TEMPLATE, Policy, optimal_intervals, synthetic_db


def measure(rows: int, sizes, policy: Policy = Policy()):
    db = synthetic_db(rows)
    stats = Stats.from_db(db)
    t = Template.parse(SYNTHETIC_TEMPLATE)
    q = instantiate(t, (50_000, 51_000, 10))
    n = len(db["R"].rows)
    overhead = policy.query_overhead
    nops = n + overhead
    cap, use = {}, {}
    for k in sizes:
        part = build_equi_depth(stats.column("R", "a"), k)
        sk = capture(q, db, part)
        cap[k] = n * (1 + policy.capture_factor) + overhead
        _, counts = run_skipping(q, db, sk)
        # probing a sketch costs one unit per fragment on top of the rows read
        use[k] = sum(c.scanned for c in counts) + k + overhead
    return nops, cap, use


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=100_000)
    ap.add_argument("--sizes", default="10,100,1000,10000")
    ap.add_argument("--costs", help="JSON file with nops, cap and use")
    args = ap.parse_args()
    if args.costs:
        with open(args.costs) as f:
            d = json.load(f)
        nops = d["nops"]
        cap = {k: float(v) for k, v in d["cap"].items()}
        use = {k: float(v) for k, v in d["use"].items()}
    else:
        nops, cap, use = measure(args.rows, [int(s) for s in args.sizes.split(",")])
        for k in cap:
            print(f"size {k:>6}: capture {cap[k]:>10.0f}  use {use[k]:>10.0f}")
        print(f"plain run {nops:.0f}")
    for option, lo, hi in optimal_intervals(nops, cap, use):
        print(f"{option!s:>8}: runs {lo} .. {'inf' if hi is None else hi - 1}")


if __name__ == "__main__":
    main()
