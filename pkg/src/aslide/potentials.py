"""Effectual heights, family partitions, node potentials, and the cycle potential.

Two labelings are in play and never mixed. Family analysis sorts internal
nodes by increasing height (emptiest first); the cycle potential sorts them
by decreasing height (fullest first). Ties break to the lower node id in both.
All arithmetic is exact: heights offsets use ``Fraction`` so nothing depends
on C being divisible by n or n - 2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .config import NetworkConfig

log = logging.getLogger(__name__)


class BoundViolation(AssertionError):
    """A runtime check of a proved inequality failed; ``details`` holds the dump."""

    def __init__(self, message: str, details=None):
        super().__init__(message)
        self.details = details


def increasing_labels(heights) -> tuple[int, ...]:
    """Internal node ids ordered emptiest first; ``heights[i - 1]`` belongs to node i."""
    return tuple(sorted(range(1, len(heights) + 1), key=lambda i: (heights[i - 1], i)))


def decreasing_labels(heights) -> tuple[int, ...]:
    return tuple(sorted(range(1, len(heights) + 1), key=lambda i: (-heights[i - 1], i)))


def effectual_heights(sorted_heights, cfg: NetworkConfig) -> list[Fraction]:
    """Rank-discounted heights for heights already sorted emptiest first."""
    step = Fraction(cfg.C, cfg.n)
    return [max(Fraction(0), h - k * step) for k, h in enumerate(sorted_heights)]


@dataclass(slots=True)
class Family:
    start: int  # 0-based rank of the emptiest member
    stop: int  # one past the fullest member
    total: Fraction
    base: int = 0  # floor of the average
    extra: int = 0  # members (the fullest ones) that get base + 1

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def average(self) -> Fraction:
        return self.total / self.size

    @property
    def minus(self) -> range:
        return range(self.start, self.stop - self.extra)

    @property
    def plus(self) -> range:
        return range(self.stop - self.extra, self.stop)


@dataclass(slots=True)
class FamilyPartition:
    """Families over ranks 0..m-1 of the increasing labeling, plus per-rank potentials."""

    effectual: list[Fraction]
    families: list[Family]
    labels: tuple[int, ...] = ()
    heights: tuple[int, ...] = ()  # sorted, aligned with ``labels``
    phi: list[int] = field(default_factory=list)  # per rank
    convention: str = "increasing"

    def family_index(self, rank: int) -> int:
        for k, fam in enumerate(self.families):
            if fam.start <= rank < fam.stop:
                return k
        raise IndexError(rank)

    def phi_by_node(self) -> dict[int, int]:
        return {node: self.phi[r] for r, node in enumerate(self.labels)}

    def rank_of(self) -> dict[int, int]:
        return {node: r for r, node in enumerate(self.labels)}

    def bounds(self) -> list[tuple[int, int]]:
        return [(f.start, f.stop) for f in self.families]


def partition_families(effectual) -> FamilyPartition:
    """Greedy prefix partition: each family takes the block of minimum average, longest on ties."""
    eff = [Fraction(e) for e in effectual]
    m = len(eff)
    families: list[Family] = []
    start = 0
    while start < m:
        best_stop, best_sum = start + 1, eff[start]
        running = Fraction(0)
        for stop in range(start + 1, m + 1):
            running += eff[stop - 1]
            # running/(stop-start) <= best_sum/(best_stop-start), cross-multiplied
            if running * (best_stop - start) <= best_sum * (stop - start):
                best_stop, best_sum = stop, running
        families.append(Family(start, best_stop, best_sum))
        start = best_stop
    part = FamilyPartition(eff, families)
    node_potentials(part)
    return part


def node_potentials(part: FamilyPartition) -> list[int]:
    """Spread each family's total evenly; the remainder goes one apiece to the fullest members."""
    phi = [0] * len(part.effectual)
    for fam in part.families:
        if fam.total.denominator != 1:
            raise ValueError(f"family total {fam.total} is not an integer; choose C divisible by n")
        total = int(fam.total)
        fam.base, fam.extra = divmod(total, fam.size)
        for r in fam.minus:
            phi[r] = fam.base
        for r in fam.plus:
            phi[r] = fam.base + 1
    part.phi = phi
    return phi


def family_snapshot(heights, cfg: NetworkConfig) -> FamilyPartition:
    """Partition for a live height vector (``heights[i - 1]`` is node i)."""
    labels = increasing_labels(heights)
    ordered = tuple(heights[i - 1] for i in labels)
    part = partition_families(effectual_heights(ordered, cfg))
    part.labels = labels
    part.heights = ordered
    return part


# ---------------------------------------------------------------- family property checks
#
# Each checker takes a partition built by ``family_snapshot`` and returns a
# list of human-readable violations (empty means the property holds).


def _avg(eff, a: int, b: int) -> Fraction:
    return sum(eff[a:b], Fraction(0)) / (b - a)


def check_potential_sums(part: FamilyPartition) -> list[str]:
    out = []
    for k, fam in enumerate(part.families):
        got = sum(part.phi[fam.start:fam.stop])
        if got != fam.total:
            out.append(f"family {k}: potentials sum to {got}, effectual total {fam.total}")
        spread = {part.phi[r] for r in range(fam.start, fam.stop)}
        if max(spread) - min(spread) > 1:
            out.append(f"family {k}: potentials {sorted(spread)} differ by more than one")
    return out


def check_contiguous(part: FamilyPartition) -> list[str]:
    m = len(part.effectual)
    expect = 0
    for k, fam in enumerate(part.families):
        if fam.start != expect or fam.stop <= fam.start:
            return [f"family {k} spans [{fam.start}, {fam.stop}), expected to start at {expect}"]
        expect = fam.stop
    return [] if expect == m else [f"families cover {expect} of {m} nodes"]


def check_minimal_blocks(part: FamilyPartition) -> list[str]:
    """Every split of a family is no lighter in front; every later block is strictly heavier."""
    eff = part.effectual
    m = len(eff)
    out = []
    for k, fam in enumerate(part.families):
        avg = fam.average
        for cut in range(fam.start + 1, fam.stop):
            front, back = _avg(eff, fam.start, cut), _avg(eff, cut, fam.stop)
            if not front >= avg >= back:
                out.append(f"family {k}: split at {cut} gives {front} / {avg} / {back}")
        for stop in range(fam.stop + 1, m + 1):
            if not avg < _avg(eff, fam.stop, stop):
                out.append(f"family {k}: block [{fam.stop}, {stop}) is not heavier than {avg}")
    return out


def check_increasing_averages(part: FamilyPartition) -> list[str]:
    fams = part.families
    return [
        f"families {k} and {k + 1}: averages {fams[k].average} then {fams[k + 1].average}"
        for k in range(len(fams) - 1)
        if not fams[k].average < fams[k + 1].average
    ]


def check_rank_monotonicity(part: FamilyPartition, cfg: NetworkConfig) -> list[str]:
    """Near neighbours never gain effectual height; far-below ones stay strictly lighter."""
    H, eff = part.heights, part.effectual
    step = Fraction(cfg.C, cfg.n)
    out = []
    for i, j in combinations(range(len(H)), 2):
        if H[i] >= H[j] - step and not eff[i] >= eff[j]:
            out.append(f"ranks {i},{j}: heights {H[i]},{H[j]} within C/n but effectual {eff[i]} < {eff[j]}")
        if H[i] < H[j] - (j - i) * step and eff[j] > 0 and not eff[i] < eff[j]:
            out.append(f"ranks {i},{j}: heights {H[i]},{H[j]} far apart but effectual {eff[i]} >= {eff[j]}")
    return out


def check_non_increasing_pairs(part: FamilyPartition) -> list[str]:
    eff = part.effectual
    return [
        f"ranks {j},{j + 1}: effectual {eff[j]} >= {eff[j + 1]} but split across families"
        for j in range(len(eff) - 1)
        if eff[j + 1] <= eff[j] and part.family_index(j) != part.family_index(j + 1)
    ]


def check_close_heights(part: FamilyPartition, cfg: NetworkConfig) -> list[str]:
    H = part.heights
    step = Fraction(cfg.C, cfg.n)
    return [
        f"ranks {i},{j}: heights {H[i]},{H[j]} within C/n but in different families"
        for i, j in combinations(range(len(H)), 2)
        if abs(H[i] - H[j]) <= step and part.family_index(i) != part.family_index(j)
    ]


def exhaustive_partition(effectual) -> list[tuple[int, int]]:
    """Reference partition by enumerating every split into contiguous blocks.

    Picks the lexicographically smallest sequence of (block average, -block end),
    which is what "lightest first block, longest on ties, then repeat" means.
    """
    eff = [Fraction(e) for e in effectual]
    m = len(eff)
    best_key, best = None, None
    for mask in range(1 << max(m - 1, 0)):
        cuts = [0] + [k + 1 for k in range(m - 1) if mask >> k & 1] + [m]
        blocks = list(zip(cuts, cuts[1:]))
        key = [x for a, b in blocks for x in (_avg(eff, a, b), -b)]
        if best_key is None or key < best_key:
            best_key, best = key, blocks
    return best


FAMILY_CHECKS = {
    "potential-sums": lambda p, cfg: check_potential_sums(p),
    "contiguous": lambda p, cfg: check_contiguous(p),
    "minimal-blocks": lambda p, cfg: check_minimal_blocks(p),
    "increasing-averages": lambda p, cfg: check_increasing_averages(p),
    "rank-monotonicity": check_rank_monotonicity,
    "non-increasing-pairs": lambda p, cfg: check_non_increasing_pairs(p),
    "close-heights": check_close_heights,
}


def check_family_properties(heights, cfg: NetworkConfig, exhaustive_limit: int = 8) -> dict[str, list[str]]:
    """Run every family property on one height vector; returns only failing checks."""
    part = family_snapshot(heights, cfg)
    failures = {}
    for name, check in FAMILY_CHECKS.items():
        bad = check(part, cfg)
        if bad:
            failures[name] = bad
    if cfg.n <= exhaustive_limit:
        ref = exhaustive_partition(part.effectual)
        if ref != part.bounds():
            failures["exhaustive"] = [f"greedy {part.bounds()} vs exhaustive {ref}"]
    return failures


# ---------------------------------------------------------------- cycle potential


@dataclass(slots=True)
class PsiSnapshot:
    index: int
    labels: tuple[int, ...]  # fullest first
    heights: tuple[int, ...]
    psi: Fraction
    dominant: tuple[int, ...]  # 1 where the offset height is non-negative
    slack: tuple[Fraction, ...]  # min(0, offset height)
    m: int
    convention: str = "decreasing"


def _offsets(sorted_desc, cfg: NetworkConfig) -> list[Fraction]:
    m = cfg.n - 2
    return [h - Fraction((m - i) * cfg.C, m) for i, h in enumerate(sorted_desc, 1)]


def psi(heights, cfg: NetworkConfig) -> Fraction:
    """Weighted surplus of each node over a descending staircase; fuller ranks weigh more."""
    m = cfg.n - 2
    ordered = sorted(heights, reverse=True)
    return sum(
        (max(Fraction(0), off) / 2 ** (m - i) for i, off in enumerate(_offsets(ordered, cfg), 1)),
        Fraction(0),
    )


def psi_snapshot(index: int, heights, cfg: NetworkConfig) -> PsiSnapshot:
    labels = decreasing_labels(heights)
    ordered = tuple(heights[i - 1] for i in labels)
    offs = _offsets(ordered, cfg)
    return PsiSnapshot(
        index, labels, ordered, psi(heights, cfg),
        tuple(int(o >= 0) for o in offs), tuple(min(Fraction(0), o) for o in offs), cfg.n - 2,
    )


@dataclass(slots=True)
class CycleCheck:
    index: int
    start: int
    end: int
    delivered: int
    psi_before: Fraction
    psi_after: Fraction
    lhs: Fraction
    rhs: Fraction
    cumulative: int
    cumulative_rhs: Fraction

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs and self.cumulative <= self.cumulative_rhs and self.psi_after >= 0

    def as_record(self) -> dict:
        return {
            "check": "cycle", "cycle": self.index, "rounds": [self.start, self.end],
            "delivered": self.delivered, "psi_before": str(self.psi_before), "psi_after": str(self.psi_after),
            "lhs": str(self.lhs), "rhs": str(self.rhs), "cumulative": self.cumulative,
            "cumulative_rhs": str(self.cumulative_rhs), "pass": self.ok,
        }


def _cycle_spans(trace, cfg: NetworkConfig, cycles=None) -> list[tuple[int, int]]:
    if cycles is not None:
        return [(c.start, c.end) for c in cycles if c.end is not None and c.end <= len(trace)]
    length = (cfg.n - 1) * cfg.C
    return [(s, s + length - 1) for s in range(1, len(trace) - length + 2, length)]


def check_cycle_inequality(trace, cfg: NetworkConfig, cycles=None, strict: bool = True) -> list[CycleCheck]:
    """Per completed cycle: deliveries plus potential change stay under 7C/(n-2).

    ``cycles`` are the adversary's ``CycleInfo`` records; without them the
    fixed cycle length (n-1)C of the cyclic adversary is assumed. With
    ``strict`` the first failing cycle raises ``BoundViolation``.
    """
    m = cfg.n - 2
    rhs = Fraction(7 * cfg.C, m)
    zero = (0,) * m
    out: list[CycleCheck] = []
    total = 0
    for index, (start, end) in enumerate(_cycle_spans(trace, cfg, cycles), 1):
        before = trace[start - 2] if start > 1 else None
        h0 = before.heights if before else zero
        z0 = before.Z if before else 0
        last = trace[end - 1]
        delivered = last.Z - z0
        total += delivered
        p0, p1 = psi(h0, cfg), psi(last.heights, cfg)
        rec = CycleCheck(index, start, end, delivered, p0, p1, delivered + p1 - p0, rhs,
                         total, Fraction(7 * index * cfg.C, m))
        if index == 1 and p0 != 0:
            raise BoundViolation(f"cycle potential starts at {p0}, expected 0", rec)
        out.append(rec)
        if strict and not rec.ok:
            raise BoundViolation(f"cycle {index}: {rec.lhs} > {rec.rhs} or cumulative bound broken", rec)
    return out
