"""Trace-replay invariant checkers for both online protocols.

Each checker rebuilds node contents from the moves in a trace, independently
of the protocol code, and compares them with what the trace claims. A
corrupted or hand-edited trace therefore fails with the round it breaks in.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .config import SENDER, NetworkConfig
from .model import EventRecord, Trace

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Violation:
    x: int
    check: str
    message: str

    def as_record(self) -> dict:
        return {"check": self.check, "x": self.x, "message": self.message, "pass": False}


@dataclass(slots=True)
class DropAudit:
    transfers: int  # transfers between two internal nodes
    min_drop: int | None  # None when there were none
    max_rise: int | None  # largest negative drop, i.e. the worst case seen

    def holds(self, bound: int) -> bool:
        return self.min_drop is None or self.min_drop >= bound


def _virtual_height(cfg: NetworkConfig, node: int) -> int | None:
    if node == SENDER:
        return cfg.sender_height
    if node == cfg.receiver:
        return cfg.receiver_height
    return None


class _Ledger:
    """Packet locations and counters shared by both replays."""

    def __init__(self, cfg: NetworkConfig, out: list[Violation]):
        self.cfg = cfg
        self.out = out
        self.where: dict[int, int] = {}  # packet -> internal node
        self.done: set[int] = set()
        self.hops: dict[int, int] = {}
        self.Y = self.Z = self.T = 0
        self.prev_x = 0

    def flag(self, x: int, check: str, message: str) -> None:
        self.out.append(Violation(x, check, message))

    def frame(self, rec: EventRecord) -> bool:
        """Round numbering and edge sanity; False means skip the record's moves."""
        cfg = self.cfg
        if rec.x != self.prev_x + 1:
            self.flag(rec.x, "round-order", f"round {rec.x} follows {self.prev_x}")
        self.prev_x = rec.x
        u, v = rec.edge
        if u == v or not (0 <= u < cfg.n and 0 <= v < cfg.n):
            self.flag(rec.x, "edge", f"invalid edge {rec.edge}")
            return False
        seen = set()
        for mv in rec.moves:
            if {mv.src, mv.dst} != {u, v}:
                self.flag(rec.x, "edge", f"packet {mv.packet} moved {mv.src}->{mv.dst} on edge {rec.edge}")
                return False
            if mv.src in seen:
                self.flag(rec.x, "edge", f"two packets left node {mv.src} in one round")
            seen.add(mv.src)
        return True

    def depart(self, x: int, mv) -> None:
        cfg = self.cfg
        p = mv.packet
        if mv.src == SENDER:
            if p in self.where or p in self.done or p in self.hops:
                self.flag(x, "conservation", f"sender re-inserted packet {p}")
            self.hops.setdefault(p, 0)
            self.Y += 1
            return
        if mv.src == cfg.receiver:
            self.flag(x, "conservation", f"packet {p} left the receiver")
            return
        held = self.where.pop(p, None)
        if held != mv.src:
            self.flag(x, "conservation", f"packet {p} left node {mv.src} but was at {held}")
        self.T += 1
        self.hops[p] = self.hops.get(p, 0) + 1
        if self.hops[p] > 2 * cfg.n:
            self.flag(x, "per-packet", f"packet {p} moved {self.hops[p]} times, limit {2 * cfg.n}")

    def arrive(self, x: int, mv) -> None:
        cfg = self.cfg
        p = mv.packet
        if mv.dst == cfg.receiver:
            if p in self.done:
                self.flag(x, "conservation", f"receiver got packet {p} twice")
            self.done.add(p)
            self.Z += 1
        elif mv.dst == SENDER:
            self.flag(x, "conservation", f"packet {p} moved into the sender")
        else:
            self.where[p] = mv.dst

    def counters(self, rec: EventRecord) -> None:
        claimed = (rec.Y, rec.Z, rec.T)
        if claimed != (self.Y, self.Z, self.T):
            self.flag(rec.x, "counters", f"trace claims Y,Z,T={claimed}, replay gives {(self.Y, self.Z, self.T)}")
        if self.T > 2 * self.cfg.n * self.Y:
            self.flag(rec.x, "transfer-total", f"T={self.T} exceeds 2nY={2 * self.cfg.n * self.Y}")

    def heights(self, rec: EventRecord, replayed: list[int]) -> None:
        C = self.cfg.C
        if len(rec.heights) != len(replayed):
            self.flag(rec.x, "heights", f"{len(rec.heights)} heights for {len(replayed)} nodes")
            return
        for i, (claimed, have) in enumerate(zip(rec.heights, replayed), 1):
            if claimed != have:
                self.flag(rec.x, "heights", f"node {i} claims height {claimed}, replay holds {have}")
            if not 0 <= have <= C:
                self.flag(rec.x, "capacity", f"node {i} holds {have} packets, capacity {C}")


def check_slide_trace(trace: Trace, cfg: NetworkConfig) -> list[Violation]:
    """Replay a semi-asynchronous Slide trace with explicit FILO stacks."""
    out: list[Violation] = []
    led = _Ledger(cfg, out)
    stacks: list[list[int]] = [[] for _ in range(cfg.n)]
    gap = cfg.gap
    for rec in trace:
        if not led.frame(rec):
            continue
        x = rec.x
        pre = [len(s) for s in stacks]
        if len(rec.moves) > 1:
            led.flag(x, "symmetry", f"{len(rec.moves)} packets crossed in one round")

        def height(w):
            vh = _virtual_height(cfg, w)
            return pre[w] if vh is None else vh

        for mv in rec.moves:
            H, h = height(mv.src), height(mv.dst)
            if H - h < gap:
                led.flag(x, "height-gap", f"{mv.src}->{mv.dst} with heights {H},{h}, gap {gap}")
            if cfg.is_internal(mv.src):
                stack = stacks[mv.src]
                if not stack or stack[-1] != mv.packet:
                    led.flag(x, "filo", f"node {mv.src} sent {mv.packet}, top is {stack[-1] if stack else None}")
            if cfg.is_internal(mv.src) and cfg.is_internal(mv.dst):
                drop = H - (h + 1)
                if drop < gap - 1:
                    led.flag(x, "drop", f"packet {mv.packet} dropped {drop}, limit {gap - 1}")
                if mv.drop is not None and mv.drop != drop:
                    led.flag(x, "drop", f"recorded drop {mv.drop}, replay gives {drop}")
            led.depart(x, mv)
            if cfg.is_internal(mv.src):
                stack = stacks[mv.src]
                if mv.packet in stack:
                    stack.remove(mv.packet)
        for mv in rec.moves:
            led.arrive(x, mv)
            if cfg.is_internal(mv.dst):
                stacks[mv.dst].append(mv.packet)
        led.heights(rec, [len(stacks[i]) for i in cfg.internal])
        led.counters(rec)
    return out


def check_slide_plus_trace(trace: Trace, cfg: NetworkConfig) -> list[Violation]:
    """Replay a fully asynchronous Slide+ trace: contents, bookkeeping bounds, and recorded decisions."""
    out: list[Violation] = []
    led = _Ledger(cfg, out)
    count = [0] * cfg.n
    n, C = cfg.n, cfg.C
    floor = cfg.gap - 4 * n
    for rec in trace:
        if not led.frame(rec):
            continue
        x = rec.x
        u, v = rec.edge
        for mv in rec.moves:
            if cfg.is_internal(mv.src) and cfg.is_internal(mv.dst):
                if mv.drop is None:
                    led.flag(x, "drop", f"transfer of {mv.packet} has no recorded drop")
                elif mv.drop < floor:
                    led.flag(x, "drop", f"packet {mv.packet} dropped {mv.drop}, limit {floor}")
                if rec.decision is None or None in rec.decision:
                    led.flag(x, "decision", f"transfer of {mv.packet} without a recorded decision")
                else:
                    used = dict(zip((u, v), rec.decision))
                    if used[mv.src] - used[mv.dst] < cfg.plus_gap:
                        led.flag(x, "decision", f"{mv.src}->{mv.dst} on recorded heights "
                                                f"{used[mv.src]},{used[mv.dst]}")
            led.depart(x, mv)
            if cfg.is_internal(mv.src):
                count[mv.src] -= 1
        for mv in rec.moves:
            led.arrive(x, mv)
            if cfg.is_internal(mv.dst):
                count[mv.dst] += 1
        led.heights(rec, [count[i] for i in cfg.internal])
        led.counters(rec)
        for name, values in (("ghosts", rec.ghosts), ("outstanding", rec.outstanding)):
            if values is None:
                led.flag(x, name, "record carries no per-node bookkeeping")
                continue
            for i, k in enumerate(values, 1):
                if not 0 <= k <= n:
                    led.flag(x, name, f"node {i} has {k} {name}, limit {n}")
        if rec.ghosts is not None:
            for i, (g, h) in enumerate(zip(rec.ghosts, rec.heights), 1):
                if g + h > C:
                    led.flag(x, "capacity", f"node {i} uses {g + h} slots, capacity {C}")
        if rec.queued is not None and rec.queued > 1:
            led.flag(x, "queued", f"{rec.queued} requests waiting on one directed edge")
    return out


def audit_transfer_drop(trace: Trace) -> DropAudit:
    """Smallest recorded stack-position drop over transfers between internal nodes.

    Moves out of the sender or into the receiver are excluded because those
    endpoints have no stack.
    """
    drops = [mv.drop for rec in trace for mv in rec.moves if mv.kind == "transfer" and mv.drop is not None]
    if not drops:
        return DropAudit(0, None, None)
    lo = min(drops)
    return DropAudit(len(drops), lo, -lo)


def check_trace(trace: Trace, cfg: NetworkConfig) -> list[Violation]:
    if cfg.protocol == "slide":
        return check_slide_trace(trace, cfg)
    if cfg.protocol == "slide-plus":
        return check_slide_plus_trace(trace, cfg)
    raise ValueError(f"no trace checker for protocol {cfg.protocol!r}")
