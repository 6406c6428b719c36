#!/usr/bin/env python3
"""Sweep the cyclic-adversary experiment over several network sizes and print one row per size."""
import argparse
import logging

from aslide.suites import lower_bound

log = logging.getLogger(__name__)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="6:24,8:64,10:100", help="comma-separated n:C pairs")
    ap.add_argument("--cycles", type=int, default=50)
    args = ap.parse_args()
    print(f"{'n':>3} {'C':>5} {'cycles':>6} {'online':>7} {'offline':>8} {'max lhs':>8} {'limit':>7} ok")
    for pair in args.sizes.split(","):
        n, C = (int(v) for v in pair.split(":"))
        records = list(lower_bound(n, C, args.cycles))
        cycles = [r for r in records if r["check"] == "cycle"]
        summary = records[-1]
        worst = max((eval_fraction(r["lhs"]) for r in cycles), default=0.0)
        limit = 7 * C / (n - 2)
        offline = cycles[-1]["optimum"] if cycles else 0
        print(f"{n:>3} {C:>5} {len(cycles):>6} {summary.get('delivered', 0):>7} {offline:>8} "
              f"{worst:>8.2f} {limit:>7.2f} {summary['pass']}")


def eval_fraction(text: str) -> float:
    num, _, den = text.partition("/")
    return int(num) / int(den or 1)


if __name__ == "__main__":
    main()
