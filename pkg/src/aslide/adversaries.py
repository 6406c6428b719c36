"""Edge schedules: adaptive lower-bound adversaries, seeded random, and file replay.

Every adversary exposes ``next_edge(heights)`` where ``heights[i - 1]`` is
the height of internal node ``i``. The adaptive ones read heights only when a
segment starts.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .config import SENDER, NetworkConfig

Edge = tuple[int, int]
Schedule = list[Edge]


class ScheduleError(ValueError):
    pass


class AdversaryFault(RuntimeError):
    pass


@dataclass(slots=True)
class Segment:
    edge: Edge
    start: int  # first round of the segment
    rounds: int


@dataclass(slots=True)
class CycleInfo:
    index: int
    start: int  # first round of the cycle
    labels: tuple[int, ...]  # internal node ids, fullest first
    heights: tuple[int, ...]  # heights of ``labels`` at cycle start
    segments: list[Segment] = field(default_factory=list)
    moved: list[int] = field(default_factory=list)  # net packets along each segment edge
    delivered: int | None = None
    end: int | None = None  # last round, once the cycle is complete

    @property
    def length(self) -> int:
        return sum(s.rounds for s in self.segments)

    def segment_count(self, C: int) -> int:
        return self.length // C


def _fewer(a: int, b: int, heights) -> int:
    """Endpoint storing fewer packets; lower id on ties."""
    ha, hb = heights[a - 1], heights[b - 1]
    if ha != hb:
        return a if ha < hb else b
    return min(a, b)


def decreasing_labels(heights) -> tuple[int, ...]:
    return tuple(sorted(range(1, len(heights) + 1), key=lambda i: (-heights[i - 1], i)))


class _SegmentedAdversary:
    """Repeats one edge for C rounds, choosing the next edge at each boundary."""

    def __init__(self, cfg: NetworkConfig):
        self.cfg = cfg
        self.cycles: list[CycleInfo] = []
        self.x = 0
        self._edge: Edge | None = None
        self._left = 0

    def next_edge(self, heights) -> Edge:
        if self._left == 0:
            self._edge = self._choose(tuple(heights))
            self._left = self.cfg.C
            self.cycles[-1].segments.append(Segment(self._edge, self.x + 1, self.cfg.C))
        self._left -= 1
        self.x += 1
        return self._edge

    def _open_cycle(self, heights) -> CycleInfo:
        if self.cycles:
            self.cycles[-1].end = self.x
        labels = decreasing_labels(heights)
        info = CycleInfo(len(self.cycles) + 1, self.x + 1, labels, tuple(heights[i - 1] for i in labels))
        self.cycles.append(info)
        return info

    def completed_cycles(self) -> list[CycleInfo]:
        done = [c for c in self.cycles if c.end is not None]
        last = self.cycles[-1] if self.cycles else None
        if last is not None and last.end is None and self._left == 0 and self._finished_last():
            last.end = self.x
            done.append(last)
        return done

    def _finished_last(self) -> bool:
        raise NotImplementedError

    def _choose(self, heights) -> Edge:
        raise NotImplementedError


class CyclicAdversary(_SegmentedAdversary):
    """Fixed-length cycles of n-1 segments: sender, a chain through every internal node, receiver."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__(cfg)
        self._seg = 0
        self._carry = 0

    def _choose(self, heights) -> Edge:
        m = self.cfg.n - 2
        if self._seg == 0:
            info = self._open_cycle(heights)
            self._carry = info.labels[0]
            self._seg = 1
            return (SENDER, self._carry)
        labels = self.cycles[-1].labels
        i = self._seg
        if i > 1:
            self._carry = _fewer(self._carry, labels[i - 1], heights)
        if i < m:
            edge = (self._carry, labels[i])
            self._seg += 1
        else:
            edge = (self._carry, self.cfg.receiver)
            self._seg = 0
        return edge

    def _finished_last(self) -> bool:
        return self._seg == 0


class GreedyAdversary(_SegmentedAdversary):
    """Variable-length cycles that chase the next-lower node until they reach the receiver."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__(cfg)
        self._hat: int | None = None
        self._partner: int | None = None
        self._closing = True

    def _choose(self, heights) -> Edge:
        cfg = self.cfg
        if self._closing:
            info = self._open_cycle(heights)
            self._closing = False
            self._hat = None
            self._partner = info.labels[0]
            return (SENDER, self._partner)
        hat = self._partner if self._hat is None else _fewer(self._hat, self._partner, heights)
        self._hat = hat
        if self.cycles[-1].length + cfg.C > cfg.n * cfg.C:
            raise AdversaryFault(f"cycle {self.cycles[-1].index} exceeded {cfg.n} segments")
        level = heights[hat - 1]
        below = [w for w in cfg.internal if heights[w - 1] < level]
        if below:
            target = min(below, key=lambda w: (level - heights[w - 1], w))
        else:
            target = cfg.receiver
            self._closing = True
        self._partner = target
        return (hat, target)

    def _finished_last(self) -> bool:
        return self._closing


class RandomAdversary:
    def __init__(self, n: int, seed: int):
        self.pairs = list(combinations(range(n), 2))
        self.rng = random.Random(seed)

    def next_edge(self, heights=None) -> Edge:
        return self.pairs[self.rng.randrange(len(self.pairs))]


class ReplayAdversary:
    def __init__(self, schedule: Schedule):
        self.schedule = list(schedule)
        self.x = 0

    def next_edge(self, heights=None) -> Edge | None:
        if self.x >= len(self.schedule):
            return None
        self.x += 1
        return self.schedule[self.x - 1]


def random_schedule(n: int, seed: int, rounds: int) -> Schedule:
    adv = RandomAdversary(n, seed)
    return [adv.next_edge() for _ in range(rounds)]


def bursty_schedule(n: int, seed: int, rounds: int, max_hold: int) -> Schedule:
    """Random edges, each held for a uniform 1..max_hold consecutive rounds.

    Long holds let a patient offline protocol move packets in rounds where a
    height-driven one stands still, which uniform schedules almost never do.
    """
    rng = random.Random(seed)
    pairs = list(combinations(range(n), 2))
    out: Schedule = []
    while len(out) < rounds:
        out.extend([pairs[rng.randrange(len(pairs))]] * rng.randint(1, max_hold))
    return out[:rounds]


def parse_schedule(text: str, n: int) -> Schedule:
    edges: Schedule = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ScheduleError(f"line {lineno}: expected 3 columns, got {len(parts)}")
        try:
            x, u, v = (int(p) for p in parts)
        except ValueError:
            raise ScheduleError(f"line {lineno}: non-integer field") from None
        if x != len(edges) + 1:
            raise ScheduleError(f"line {lineno}: round {x} out of sequence (expected {len(edges) + 1})")
        for w in (u, v):
            if not 0 <= w < n:
                raise ScheduleError(f"line {lineno}: node {w} out of range [0, {n - 1}]")
        if u == v:
            raise ScheduleError(f"line {lineno}: self-loop on node {u}")
        edges.append((u, v))
    return edges


def read_schedule(path: str | Path, n: int) -> Schedule:
    return parse_schedule(Path(path).read_text(), n)


def format_schedule(schedule: Schedule) -> str:
    return "".join(f"{x} {u} {v}\n" for x, (u, v) in enumerate(schedule, 1))


def write_schedule(schedule: Schedule, path: str | Path) -> None:
    Path(path).write_text(format_schedule(schedule))


def annotate_cycles(cycles: list[CycleInfo], trace) -> list[CycleInfo]:
    """Fill per-segment net movement and per-cycle deliveries from a trace."""
    for info in cycles:
        info.moved = []
        for seg in info.segments:
            a, b = seg.edge
            net = 0
            for rec in trace[seg.start - 1: seg.start - 1 + seg.rounds]:
                for mv in rec.moves:
                    net += (mv.src == a) - (mv.src == b)
            info.moved.append(net)
        if info.end is not None and info.end <= len(trace):
            before = trace[info.start - 2].Z if info.start > 1 else 0
            info.delivered = trace[info.end - 1].Z - before
    return cycles


def make_adversary(name: str, cfg: NetworkConfig, seed: int = 0, schedule: Schedule | None = None):
    if name == "random":
        return RandomAdversary(cfg.n, seed)
    if name == "cyclic":
        return CyclicAdversary(cfg)
    if name == "greedy":
        return GreedyAdversary(cfg)
    if name == "replay":
        if schedule is None:
            raise ValueError("replay adversary needs a schedule")
        return ReplayAdversary(schedule)
    raise ValueError(f"unknown adversary {name!r}")
