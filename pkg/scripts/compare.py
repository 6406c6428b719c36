#!/usr/bin/env python3
"""Dual runs over many seeds; prints online and offline deliveries and the delivery classes per run."""
import argparse
import logging

from aslide.adversaries import RandomAdversary, ReplayAdversary, bursty_schedule
from aslide.config import NetworkConfig
from aslide.dual import checkpoint_bounds, classify_deliveries, dual_run

log = logging.getLogger(__name__)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=4)
    ap.add_argument("-C", type=int, default=128)
    ap.add_argument("--protocol", choices=["slide", "slide-plus"], default="slide-plus")
    ap.add_argument("--rounds", type=int, default=10_000)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--hold", type=int, default=0, help="hold each random edge up to this many rounds")
    args = ap.parse_args()
    mode = "fully-async" if args.protocol == "slide-plus" else "semi-async"
    cfg = NetworkConfig(args.n, args.C, mode, args.protocol)
    print(f"{'seed':>4} {'online':>7} {'offline':>8} {'ratio':>6} {'co-moved':>8} {'fresh':>6} {'stale':>6} bounds")
    for seed in range(args.seeds):
        if args.hold > 1:
            adversary = ReplayAdversary(bursty_schedule(cfg.n, seed, args.rounds, args.hold))
        else:
            adversary = RandomAdversary(cfg.n, seed)
        dual = dual_run(cfg, adversary, args.rounds)
        cls = classify_deliveries(dual)
        ok = all(b.ok for b in checkpoint_bounds(dual, sorted(dual.optimum), cls))
        online, offline = dual.trace[-1].Z, dual.plan.value
        ratio = offline / online if online else float("nan")
        print(f"{seed:>4} {online:>7} {offline:>8} {ratio:>6.3f} {len(cls.co_moved):>8} {len(cls.fresh):>6} "
              f"{len(cls.stale):>6} {ok}")


if __name__ == "__main__":
    main()
