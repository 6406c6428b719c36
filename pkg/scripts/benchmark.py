#!/usr/bin/env python3
"""Wall-clock timings for the main workloads."""
import argparse
import time

from aslide.adversaries import RandomAdversary
from aslide.config import NetworkConfig
from aslide.dual import classify_deliveries, dual_run
from aslide.model import run
from aslide.suites import lower_bound


def timed(label, fn):
    started = time.perf_counter()
    fn()
    print(f"{label:<48} {time.perf_counter() - started:8.2f}s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rounds", type=int, default=100_000)
    args = ap.parse_args()
    plus = NetworkConfig(4, 128, "fully-async", "slide-plus")
    slide = NetworkConfig(8, 64)
    timed(f"slide, random, {args.rounds} rounds", lambda: run(slide, RandomAdversary(8, 0), args.rounds))
    timed(f"slide-plus, random, {args.rounds} rounds", lambda: run(plus, RandomAdversary(4, 0), args.rounds))
    timed("lower bound, n=8 C=64, 50 cycles", lambda: list(lower_bound(8, 64, 50)))
    timed("slide-plus dual run, 10000 rounds",
          lambda: classify_deliveries(dual_run(plus, RandomAdversary(4, 0), 10_000)))


if __name__ == "__main__":
    main()
