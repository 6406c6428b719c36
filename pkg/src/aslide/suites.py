"""Property suites shared by the ``verify`` command and the acceptance tests.

Every suite yields plain dict records; a record with ``"pass": False`` is a
failure. The last record of each suite is a ``summary``.
"""
from __future__ import annotations

import itertools
import logging
import random
import time
from dataclasses import replace
from typing import Iterator

from .adversaries import CyclicAdversary, RandomAdversary, ReplayAdversary, random_schedule
from .checks import audit_transfer_drop, check_slide_plus_trace, check_slide_trace
from .config import NetworkConfig
from .dual import checkpoint_bounds, classify_deliveries, dual_run, phi_evolution
from .model import Trace, run, schedule_of
from .oracle import brute_force_delivery, max_deliveries, max_delivery, offline_plan
from .potentials import BoundViolation, check_cycle_inequality, check_family_properties

log = logging.getLogger(__name__)

Record = dict


def _summary(suite: str, checked: int, failures: int, started: float, **extra) -> Record:
    return {"check": "summary", "suite": suite, "checked": checked, "failures": failures,
            "seconds": round(time.perf_counter() - started, 3), "pass": failures == 0, **extra}


def family_properties(count: int = 10_000, seed: int = 0, n_range=(4, 12), exhaustive_limit: int = 8) -> Iterator[Record]:
    """Random height vectors; each runs every family check, plus the exhaustive oracle for small n."""
    rng = random.Random(seed)
    started = time.perf_counter()
    failures = 0
    for k in range(count):
        n = rng.randint(*n_range)
        C = n * rng.randint(2, 16)
        heights = tuple(rng.randint(0, C) for _ in range(n - 2))
        broken = check_family_properties(heights, NetworkConfig(n, C), exhaustive_limit)
        if broken:
            failures += 1
            yield {"check": "family", "case": k, "n": n, "C": C, "heights": list(heights),
                   "failed": broken, "pass": False}
    yield _summary("family-lemmas", count, failures, started)


def _trace_failures(trace: Trace, cfg: NetworkConfig, label: str) -> tuple[list[Record], Record]:
    if cfg.protocol == "slide":
        found = check_slide_trace(trace, cfg)
        floor = cfg.gap - 1
    else:
        found = check_slide_plus_trace(trace, cfg)
        floor = cfg.gap - 4 * cfg.n
    audit = audit_transfer_drop(trace)
    stats = {"check": "trace", "label": label, "rounds": len(trace),
             "Y": trace[-1].Y if trace else 0, "Z": trace[-1].Z if trace else 0, "T": trace[-1].T if trace else 0,
             "transfers": audit.transfers, "min_drop": audit.min_drop, "drop_floor": floor,
             "violations": len(found), "pass": not found and audit.holds(floor)}
    return [{"label": label, **v.as_record()} for v in found], stats


def trace_invariants(trace: Trace, cfg: NetworkConfig, label: str = "trace") -> Iterator[Record]:
    started = time.perf_counter()
    bad, stats = _trace_failures(trace, cfg, label)
    yield from bad[:100]
    yield stats
    yield _summary(f"{cfg.protocol}-invariants", len(trace), len(bad) + (not stats["pass"] and not bad), started)


def slide_invariants(n: int = 8, C: int = 64, rounds: int = 100_000, seed: int = 0) -> Iterator[Record]:
    started = time.perf_counter()
    cfg = NetworkConfig(n, C)
    trace = run(cfg, RandomAdversary(n, seed), rounds)
    bad, stats = _trace_failures(trace, cfg, f"random seed {seed}")
    yield from bad[:100]
    yield stats
    yield _summary("slide-invariants", rounds, len(bad) + (not stats["pass"] and not bad), started)


def slide_plus_invariants(n: int = 4, C: int = 128, rounds: int = 100_000, seed: int = 0) -> Iterator[Record]:
    """A random run, then the same schedule replayed; the replay must reproduce the trace."""
    started = time.perf_counter()
    cfg = NetworkConfig(n, C, "fully-async", "slide-plus")
    failures = 0
    first = run(cfg, RandomAdversary(n, seed), rounds)
    second = run(cfg, ReplayAdversary(schedule_of(first)), rounds)
    for label, trace in ((f"random seed {seed}", first), ("replay", second)):
        bad, stats = _trace_failures(trace, cfg, label)
        failures += len(bad) + (not stats["pass"] and not bad)
        yield from bad[:100]
        yield stats
    same = all(a.to_json() == b.to_json() for a, b in zip(first, second)) and len(first) == len(second)
    failures += not same
    yield {"check": "replay-determinism", "pass": same}
    yield _summary("slide-plus-invariants", 2 * rounds, failures, started)


def _plan_matches(schedule, x: int, cfg: NetworkConfig, value: int) -> bool:
    plan = offline_plan(schedule, x, cfg)
    if plan.value != value:
        return False
    if x == 0 or value == 0:
        return True
    trace = run(replace(cfg, protocol="offline-plan"), ReplayAdversary(schedule[:x]), x, plan=plan, validate=False)
    return trace[-1].Z == value


def oracle_equivalence(count: int = 1000, seed: int = 0, exhaustive_length: int = 8,
                       capacities=(1, 2), random_length: int = 10) -> Iterator[Record]:
    """Max-flow against exhaustive search: every n=3 schedule up to a length, then random n=4 ones."""
    started = time.perf_counter()
    checked = failures = 0
    pairs3 = [(0, 1), (0, 2), (1, 2)]
    for C in capacities:
        cfg = NetworkConfig(3, C, protocol="offline-plan")
        for length in range(1, exhaustive_length + 1):
            for sched in itertools.product(pairs3, repeat=length):
                sched = list(sched)
                flow = max_delivery(sched, length, cfg)
                truth = brute_force_delivery(sched, length, cfg)
                ok = flow == truth and _plan_matches(sched, length, cfg, flow)
                checked += 1
                if not ok:
                    failures += 1
                    yield {"check": "oracle", "n": 3, "C": C, "schedule": sched, "flow": flow,
                           "brute_force": truth, "pass": False}
    rng = random.Random(seed)
    for k in range(count):
        C = rng.randint(1, 3)
        length = rng.randint(1, random_length)
        cfg = NetworkConfig(4, C, protocol="offline-plan")
        sched = random_schedule(4, rng.getrandbits(32), length)
        xs = list(range(1, length + 1))
        flows = max_deliveries(sched, xs, cfg)
        for x in xs:
            truth = brute_force_delivery(sched, x, cfg)
            ok = flows[x] == truth and (x < length or _plan_matches(sched, x, cfg, flows[x]))
            checked += 1
            if not ok:
                failures += 1
                yield {"check": "oracle", "n": 4, "C": C, "schedule": sched, "x": x, "flow": flows[x],
                       "brute_force": truth, "pass": False}
    yield _summary("oracle-equivalence", checked, failures, started)


def lower_bound(n: int = 8, C: int = 64, cycles: int = 50, on_trace=None) -> Iterator[Record]:
    """Slide against the cyclic adversary: per-cycle inequality and the exact offline count.

    ``on_trace`` receives the finished trace, for callers that persist it.
    """
    started = time.perf_counter()
    cfg = NetworkConfig(n, C)
    adv = CyclicAdversary(cfg)
    trace = run(cfg, adv, cycles * (n - 1) * C)
    if on_trace is not None:
        on_trace(trace)
    done = adv.completed_cycles()
    failures = 0
    try:
        checks = check_cycle_inequality(trace, cfg, done, strict=False)
    except BoundViolation as exc:
        yield {"check": "cycle", "message": str(exc), "pass": False}
        yield _summary("lowerbound", 0, 1, started)
        return
    ends = [c.end for c in done]
    optimum = max_deliveries(schedule_of(trace), ends, cfg)
    for info, chk in zip(done, checks):
        rec = chk.as_record()
        rec["optimum"] = optimum[info.end]
        rec["optimum_expected"] = info.index * C
        rec["psi_nonnegative"] = chk.psi_after >= 0
        rec["pass"] = chk.ok and optimum[info.end] == info.index * C
        failures += not rec["pass"]
        yield rec
    yield _summary("lowerbound", len(done), failures, started, cycles=len(done),
                   delivered=trace[-1].Z if trace else 0)


def potentials(n: int = 8, C: int = 64, cycles: int = 10, runs: int = 1, rounds: int = 2000,
               seed: int = 0) -> Iterator[Record]:
    """Cycle-potential checks on a cyclic run and the network-potential ledger on random dual runs."""
    started = time.perf_counter()
    failures = checked = 0
    for rec in lower_bound(n, C, cycles):
        if rec["check"] == "summary":
            failures += rec["failures"]
            checked += rec["checked"]
        elif not rec["pass"]:
            yield rec
    for r in range(runs):
        rec = phi_run(NetworkConfig(n, C), RandomAdversary(n, seed + r), rounds, label=f"random seed {seed + r}")
        checked += 1
        failures += not rec["pass"]
        yield rec
    yield _summary("potentials", checked, failures, started)


def phi_run(cfg: NetworkConfig, adversary, rounds: int, label: str = "") -> Record:
    """One semi-asynchronous dual run with the potential ledger and the fresh-delivery bound."""
    dual = dual_run(cfg, adversary, rounds)
    cls = classify_deliveries(dual)
    try:
        ledger = phi_evolution(dual, cls, strict=False)
    except BoundViolation as exc:
        return {"check": "phi", "label": label, "message": str(exc), "pass": False}
    below = sum(1 for v, w in zip(ledger.values, ledger.weighted) if v < w)
    second = ledger.first_second_move
    late = [x for x in ledger.literal_breaks if second is None or x >= second]
    negative = sum(1 for v in ledger.values if v < 0)
    bounds = checkpoint_bounds(dual, sorted(dual.optimum), cls)
    fresh_ok = all(b.checks["fresh_vs_inserted"][0] <= b.checks["fresh_vs_inserted"][1] for b in bounds)
    return {
        "check": "phi", "label": label, "rounds": dual.horizon, "online": dual.trace[-1].Z,
        "optimum": dual.plan.value, "co_moved": len(cls.co_moved), "fresh": len(cls.fresh),
        "stale": len(cls.stale), "phi_final": ledger.phi, "min_phi": min(ledger.values),
        "below_weighted": below, "negative": negative, "literal_breaks": len(ledger.literal_breaks), "literal_late": len(late),
        "fresh_vs_inserted_ok": fresh_ok, "checkpoints": len(bounds),
        "pass": below == 0 and negative == 0 and fresh_ok and not cls.stale,
    }


SUITES = {
    "family-lemmas": family_properties,
    "slide-invariants": slide_invariants,
    "slide-plus-invariants": slide_plus_invariants,
    "oracle-equivalence": oracle_equivalence,
    "potentials": potentials,
}
