"""Side-by-side runs of an online protocol and the offline plan on one schedule.

The online protocol runs first (its adversary may be adaptive); the plan is
then computed for the realised schedule and executed in its own network.
Delivery classification and the network-potential ledger compare the two
traces round by round.
"""
from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass, field, replace

from .adversaries import ReplayAdversary
from .config import SENDER, NetworkConfig
from .model import Trace, run, schedule_of
from .oracle import OfflinePlan, earliest_plan, max_deliveries
from .potentials import BoundViolation, family_snapshot

log = logging.getLogger(__name__)


@dataclass(slots=True)
class DualRun:
    cfg: NetworkConfig
    trace: Trace  # online protocol
    schedule: list[tuple[int, int]]
    plan: OfflinePlan
    plan_trace: Trace
    optimum: dict[int, int] = field(default_factory=dict)  # checkpoint -> offline optimum

    @property
    def horizon(self) -> int:
        return len(self.schedule)


def dual_run(cfg: NetworkConfig, adversary, rounds: int, checkpoint_every: int | None = None) -> DualRun:
    """Run the online protocol, then an offline plan that is optimal at every checkpoint."""
    trace = run(cfg, adversary, rounds)
    schedule = schedule_of(trace)
    every = checkpoint_every or cfg.C
    checkpoints = list(range(every, len(schedule) + 1, every)) + [len(schedule)]
    plan, optimum = earliest_plan(schedule, checkpoints, cfg)
    plan_cfg = replace(cfg, mode="semi-async", protocol="offline-plan")
    plan_trace = run(plan_cfg, ReplayAdversary(schedule), len(schedule), plan=plan, validate=False)
    if plan_trace[-1].Z != plan.value:
        raise BoundViolation(f"plan delivered {plan_trace[-1].Z}, flow value {plan.value}")
    return DualRun(cfg, trace, schedule, plan, plan_trace, optimum)


# ---------------------------------------------------------------- classification


@dataclass(slots=True)
class DeliveryClassification:
    co_moved: set[int] = field(default_factory=set)  # moved in a round where the online protocol moved too
    fresh: set[int] = field(default_factory=set)  # every hop decided on near-current heights
    stale: set[int] = field(default_factory=set)  # some hop decided on heights off by n or more
    witnesses: dict[int, list[int]] = field(default_factory=dict)  # stale packet -> online move ids
    stale_hop: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    delivered_at: dict[int, int] = field(default_factory=dict)
    move_rounds: list[int] = field(default_factory=list)  # online move id -> round
    shortfall: int = 0  # stale packets with fewer than n witnesses

    def sizes_by(self, x: int) -> tuple[int, int, int]:
        by = self.delivered_at
        return tuple(sum(1 for p in s if by[p] <= x) for s in (self.co_moved, self.fresh, self.stale))


def _pre_heights(trace: Trace, m: int) -> list[tuple[int, ...]]:
    """Heights at the start of each round (index x - 1)."""
    out = [(0,) * m]
    out.extend(rec.heights for rec in trace[:-1])
    return out


def classify_deliveries(dual: DualRun) -> DeliveryClassification:
    cfg = dual.cfg
    n = cfg.n
    trace = dual.trace
    m = n - 2
    pre = _pre_heights(trace, m)
    moved_round = [bool(rec.moves) for rec in trace]
    # online move ids, and which nodes each touches
    move_rounds: list[int] = []
    incident: dict[int, list[int]] = {w: [] for w in range(n)}
    for rec in trace:
        for mv in rec.moves:
            mid = len(move_rounds)
            move_rounds.append(rec.x)
            incident[mv.src].append(mid)
            if mv.dst != mv.src:
                incident[mv.dst].append(mid)
    previous: dict[int, int] = {}
    last_seen: dict[frozenset, int] = {}
    for x, (u, v) in enumerate(dual.schedule, 1):
        key = frozenset((u, v))
        previous[x] = last_seen.get(key, 0)
        last_seen[key] = x

    out = DeliveryClassification(move_rounds=move_rounds)
    R = cfg.receiver
    for packet, hops in dual.plan.itineraries.items():
        t_last, _, b_last = hops[-1]
        if b_last != R:
            continue
        out.delivered_at[packet] = t_last
        if any(moved_round[t - 1] for t, _, _ in hops):
            out.co_moved.add(packet)
            continue
        if cfg.mode == "semi-async":
            # Every decision is made on current heights, so no hop can be stale.
            out.fresh.add(packet)
            continue
        bad_hop = None
        for t, a, b in hops:
            rec = trace[t - 1]
            u, v = rec.edge
            used = rec.decision or (None, None)
            for w, h_used in ((u, used[0]), (v, used[1])):
                if not cfg.is_internal(w):
                    continue
                recorded = 0 if h_used is None else h_used
                if abs(recorded - pre[t - 1][w - 1]) >= n:
                    bad_hop = (t, a, b)
                    break
            if bad_hop:
                break
        if bad_hop is None:
            out.fresh.add(packet)
            continue
        out.stale.add(packet)
        out.stale_hop[packet] = bad_hop
        t, a, b = bad_hop
        lo = previous[t]
        pool = sorted(set(incident[a]) | set(incident[b]))
        # online moves strictly after the last honoring and strictly before t
        start = bisect_left([move_rounds[i] for i in pool], lo + 1)
        chosen = [i for i in pool[start:] if move_rounds[i] < t][:n]
        if len(chosen) < n:
            out.shortfall += 1
        out.witnesses[packet] = chosen
    return out


@dataclass(slots=True)
class CheckpointBound:
    x: int
    online: int  # online deliveries by x
    optimum: int  # offline optimum by x
    inserted: int
    moves: int
    sizes: tuple[int, int, int]
    checks: dict[str, tuple[int, int]]  # name -> (lhs, rhs)

    @property
    def ok(self) -> bool:
        return all(l <= r for l, r in self.checks.values())

    def as_record(self) -> dict:
        return {
            "check": "checkpoint", "x": self.x, "online": self.online, "optimum": self.optimum,
            "co_moved": self.sizes[0], "fresh": self.sizes[1], "stale": self.sizes[2],
            "bounds": {k: {"lhs": l, "rhs": r, "pass": l <= r} for k, (l, r) in self.checks.items()},
            "pass": self.ok,
        }


def checkpoint_bounds(dual: DualRun, checkpoints, cls: DeliveryClassification | None = None) -> list[CheckpointBound]:
    """Composite and per-class delivery bounds at each checkpoint."""
    cfg = dual.cfg
    n, C = cfg.n, cfg.C
    cls = cls or classify_deliveries(dual)
    checkpoints = sorted(x for x in set(checkpoints) if 1 <= x <= dual.horizon)
    optimum = dict(dual.optimum)
    missing = [x for x in checkpoints if x not in optimum]
    if missing:
        optimum.update(max_deliveries(dual.schedule, missing, cfg))
    moves_by = _cumulative_moves(dual.trace)
    uses: dict[int, int] = {}
    out = []
    for x in checkpoints:
        rec = dual.trace[x - 1]
        z, y = rec.Z, rec.Y
        t = moves_by[x - 1]
        z1, z2, z3 = cls.sizes_by(x)
        uses = {}
        for p, ws in cls.witnesses.items():
            if cls.delivered_at[p] <= x:
                for w in ws:
                    uses[w] = uses.get(w, 0) + 1
        checks = {
            "total": (optimum[x], 8 * n * z + 8 * n * n * C),
            "co_moved": (z1, 2 * n * z + 2 * n * n * C),
            "fresh": (z2, 2 * n * z + 2 * n * n * C),
            "fresh_vs_inserted": (z2, 2 * n * y),
            "stale": (z3, 4 * n * z + 4 * n * n * C),
            "stale_vs_moves": (z3, 2 * t),
            "witness_reuse": (max(uses.values(), default=0), 2 * n),
            "plan_total": (z1 + z2 + z3, optimum[x]),
        }
        out.append(CheckpointBound(x, z, optimum[x], y, t, (z1, z2, z3), checks))
    return out


def _cumulative_moves(trace: Trace) -> list[int]:
    total, out = 0, []
    for rec in trace:
        total += len(rec.moves)
        out.append(total)
    return out


# ---------------------------------------------------------------- network potential


@dataclass(slots=True)
class PhiLedger:
    """Network potential per round boundary, with the family-weighted lower bound beside it."""

    values: list[int] = field(default_factory=list)  # index t = after round t
    weighted: list = field(default_factory=list)  # Fraction lower bound per boundary
    literal: list[int] = field(default_factory=list)  # sum over families of max(...)
    log: list[tuple[int, str, int]] = field(default_factory=list)  # (round, source, delta)
    literal_breaks: list[int] = field(default_factory=list)  # boundaries below the per-family max form
    first_second_move: int | None = None  # round of the online protocol's second move

    @property
    def phi(self) -> int:
        return self.values[-1]


def _family_bounds(part, held: dict[int, int], C: int):
    """(weighted, literal) lower bounds for one boundary's partition and fresh-packet counts."""
    from fractions import Fraction

    weighted = Fraction(0)
    literal = 0
    labels = part.labels
    for fam in part.families:
        low = sum(C - held.get(labels[r], 0) for r in fam.minus)
        high = sum(held.get(labels[r], 0) for r in fam.plus)
        literal += max(low, high)
        weighted += Fraction(fam.extra * low + (fam.size - fam.extra) * high, fam.size)
    return weighted, literal


def phi_evolution(dual: DualRun, cls: DeliveryClassification | None = None, strict: bool = True) -> PhiLedger:
    """Replay the potential ledger: 4C per online move, plus every change in a fresh packet's potential.

    A fresh packet's potential is the potential of the node holding it (zero
    at the receiver). It is first read at the boundary after its insertion,
    so insertion itself is not a change. With ``strict`` a boundary where
    the potential falls below the weighted family bound raises.
    """
    cfg = dual.cfg
    if cfg.mode != "semi-async":
        raise ValueError("the potential ledger is defined for semi-asynchronous runs")
    cls = cls or classify_deliveries(dual)
    C = cfg.C
    fresh = cls.fresh
    by_round: dict[int, list[tuple[int, int, int]]] = {}
    for t, hops in dual.plan.by_round.items():
        keep = [h for h in hops if h[0] in fresh]
        if keep:
            by_round[t] = keep
    where: dict[int, int] = {}  # fresh packet -> internal node holding it
    held: dict[int, int] = {}  # node -> fresh packets held
    cache: dict[tuple, tuple] = {}
    ledger = PhiLedger()

    def snapshot(heights):
        hit = cache.get(heights)
        if hit is None:
            part = family_snapshot(heights, cfg)
            hit = cache[heights] = (part, part.phi_by_node())
        return hit

    part, phi = snapshot((0,) * (cfg.n - 2))
    moves = 0
    baseline = 0  # minus the sum of initial potentials of inserted fresh packets
    carried = 0  # sum over nodes of held * phi
    ledger.values.append(0)
    w, lit = _family_bounds(part, held, C)
    ledger.weighted.append(w)
    ledger.literal.append(lit)
    if lit > 0:
        ledger.literal_breaks.append(0)
    for rec in dual.trace:
        x = rec.x
        if rec.moves:
            moves += len(rec.moves)
            if ledger.first_second_move is None and moves >= 2:
                ledger.first_second_move = x
            ledger.log.append((x, "transfer", 4 * C * len(rec.moves)))
        inserted_now = []
        for packet, a, b in by_round.get(x, ()):
            if a != SENDER:
                held[a] -= 1
                del where[packet]
            if cfg.is_internal(b):
                held[b] = held.get(b, 0) + 1
                where[packet] = b
            if a == SENDER:
                inserted_now.append(packet)
        part, phi = snapshot(rec.heights)
        new_carried = sum(k * phi[node] for node, k in held.items())
        initial = sum(phi[where[p]] if p in where else 0 for p in inserted_now)
        delta = (new_carried - carried) - initial
        if delta:
            ledger.log.append((x, "phi-change", delta))
        carried = new_carried
        baseline -= initial
        value = 4 * C * moves + carried + baseline
        ledger.values.append(value)
        w, lit = _family_bounds(part, held, C)
        ledger.weighted.append(w)
        ledger.literal.append(lit)
        if value < lit:
            ledger.literal_breaks.append(x)
        if strict and (value < w or value < 0):
            raise BoundViolation(
                f"round {x}: potential {value} below family bound {w}",
                {"heights": rec.heights, "families": part.bounds(), "phi": phi, "held": dict(held)},
            )
    return ledger


def fresh_vs_inserted(dual: DualRun, cls: DeliveryClassification, checkpoints) -> list[tuple[int, int, int]]:
    """(x, fresh deliveries by x, 2n * inserted by x) at each checkpoint."""
    n = dual.cfg.n
    out = []
    for x in sorted(set(checkpoints)):
        if 1 <= x <= dual.horizon:
            out.append((x, cls.sizes_by(x)[1], 2 * n * dual.trace[x - 1].Y))
    return out
