#!/usr/bin/env python3
"""Cumulative cost of the adaptive policy versus plain execution on the synthetic workload."""
import argparse
import json

from pbds.tuning import Policy, generate_workload, simulate, synthetic_db, synthetic_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=100_000)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--strategy", default="adaptive", choices=["adaptive", "eager", "plain"])
    ap.add_argument("--every", type=int, default=10, help="print every n-th query")
    ap.add_argument("--json", help="write the full report here")
    args = ap.parse_args()

    db = synthetic_db(args.rows)
    spec = synthetic_spec(args.queries)
    rep = simulate(db, spec.compiled(), generate_workload(spec), Policy(strategy=args.strategy))
    cum = rep.ledger.cumulative()
    print(f"{'query':>6} {'policy':>14} {'plain':>14}")
    for i in range(0, len(cum), args.every):
        print(f"{i + 1:>6} {cum[i]:>14.0f} {rep.plain_series[i]:>14.0f}")
    body = rep.to_json()
    print(f"ratio {body['ratio']:.3f}  modes {body['modes']}  "
          f"first capture {body['first_capture']}  first reuse {body['first_reuse']}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(body, f, indent=1)


if __name__ == "__main__":
    main()
