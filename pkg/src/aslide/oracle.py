"""Offline optimum: max-flow over the time-expanded network, plus an exhaustive cross-check.

The graph keeps one vertex pair per node version. A node gets a new version
only in layers where it is an endpoint; between those its holdings cannot
change, so this is the usual per-round layering with idle layers contracted.
Each version is split into an ``in`` and an ``out`` vertex joined by an arc of
capacity C, which bounds what the node holds at that layer boundary. The
sender is a single unbounded source. The receiver has a chain of versions
with unbounded storage, and the sink is its last version.

A run of k consecutive rounds on the same edge becomes a single layer whose
two transfer arcs have capacity k. Within such a run only the net exchange
matters, and spreading it one packet per round keeps both endpoints'
holdings between their start and end values, so the contraction is exact.
Runs are cut at every requested horizon.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_array, csr_array
from scipy.sparse.csgraph import maximum_flow

from .config import SENDER, NetworkConfig
from .model import Outcome, RequestMsg, RuleError

log = logging.getLogger(__name__)

UNBOUNDED = 2**30
METHOD = "edmonds_karp"


class OracleError(RuntimeError):
    pass


@dataclass(slots=True)
class TimeExpandedGraph:
    n: int
    C: int
    tails: list[int] = field(default_factory=list)
    heads: list[int] = field(default_factory=list)
    caps: list[int] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)  # hold | storage | transfer
    moves: list[tuple[int, int, int] | None] = field(default_factory=list)  # (first round, src, dst)
    n_vertices: int = 0
    source: int = 0
    # round boundary t -> (#vertices, #arcs, sink vertex); only at layer ends
    prefix: dict[int, tuple[int, int, int]] = field(default_factory=dict)

    def _vertex(self) -> int:
        self.n_vertices += 1
        return self.n_vertices - 1

    def _arc(self, a: int, b: int, cap: int, kind: str, move=None) -> None:
        self.tails.append(a)
        self.heads.append(b)
        self.caps.append(cap)
        self.kinds.append(kind)
        self.moves.append(move)

    @property
    def layers(self) -> int:
        return len(self.prefix) - 1

    def sink(self, x: int) -> int:
        return self.prefix[x][2]


def _runs(schedule, x: int, cuts) -> list[tuple[int, int, int, int]]:
    """(first round, length, u, v) for maximal runs of one edge, cut at ``cuts``."""
    cuts = set(cuts)
    runs = []
    for t in range(1, x + 1):
        u, v = schedule[t - 1]
        if runs and (t - 1) not in cuts:
            t0, k, ru, rv = runs[-1]
            if {ru, rv} == {u, v}:
                runs[-1] = (t0, k + 1, ru, rv)
                continue
        runs.append((t, 1, u, v))
    return runs


def build_graph(schedule, x: int, cfg: NetworkConfig, cuts=()) -> TimeExpandedGraph:
    if x > len(schedule):
        raise OracleError(f"schedule covers {len(schedule)} rounds, need {x}")
    n, C = cfg.n, cfg.C
    R = n - 1
    g = TimeExpandedGraph(n, C)
    g.source = g._vertex()
    out_of = {SENDER: g.source}
    into = {SENDER: g.source}
    r0 = g._vertex()
    out_of[R] = into[R] = r0
    for w in range(1, R):
        a, b = g._vertex(), g._vertex()
        g._arc(a, b, C, "hold")
        into[w], out_of[w] = a, b
    g.prefix[0] = (g.n_vertices, len(g.tails), r0)
    for t0, k, u, v in _runs(schedule, x, cuts):
        prev = {u: out_of[u], v: out_of[v]}
        for w in (u, v):
            if w == R:
                r_new = g._vertex()
                g._arc(prev[w], r_new, UNBOUNDED, "storage")
                into[w] = out_of[w] = r_new
            elif w != SENDER:
                a, b = g._vertex(), g._vertex()
                g._arc(prev[w], a, C, "storage")
                g._arc(a, b, C, "hold")
                into[w], out_of[w] = a, b
        for a, b in ((u, v), (v, u)):
            # Packets never leave the receiver and never return to the sender.
            cap = 0 if a == R or b == SENDER else k
            g._arc(prev[a], into[b], cap, "transfer", (t0, a, b))
        g.prefix[t0 + k - 1] = (g.n_vertices, len(g.tails), out_of[R])
    return g


def _solve(g: TimeExpandedGraph, x: int):
    nv, na, sink = g.prefix[x]
    tails = np.asarray(g.tails[:na], dtype=np.int64)
    heads = np.asarray(g.heads[:na], dtype=np.int64)
    caps = np.asarray(g.caps[:na], dtype=np.int32)
    keep = caps > 0
    tails, heads, caps = tails[keep], heads[keep], caps[keep]
    if sink == g.source or x == 0:
        return 0, tails, heads, np.zeros(len(caps), dtype=np.int64), keep
    mat = csr_array((caps, (tails, heads)), shape=(nv, nv))
    if mat.nnz != len(caps):
        raise OracleError("parallel arcs in time-expanded graph")
    res = maximum_flow(mat, g.source, sink, method=METHOD)
    flow = res.flow.tocsr()
    values = np.asarray(flow[tails, heads]).ravel().astype(np.int64)
    return int(res.flow_value), tails, heads, values, keep


def max_delivery(schedule, x: int, cfg: NetworkConfig) -> int:
    """Most packets any protocol that knows the schedule can deliver in rounds 1..x."""
    if x == 0:
        return 0
    return _solve(build_graph(schedule, x, cfg), x)[0]


def _earliest_arrival(g: TimeExpandedGraph, schedule, checkpoints: list[int], cfg: NetworkConfig):
    """One flow that is maximum at every checkpoint at once.

    Such a flow exists for a single source and nested sink sets, and any
    flow maximising the sum of the per-checkpoint deliveries is one. That sum
    is linear in the arc flows (each unit reaching the receiver in a layer
    ending at round e counts once per checkpoint >= e), so a single min-cost
    flow linear program finds it. The constraint matrix is a network matrix,
    so the simplex vertex returned is integral.
    """
    x = checkpoints[-1]
    nv, na, sink = g.prefix[x]
    caps = np.asarray(g.caps[:na], dtype=np.float64)
    keep = np.flatnonzero(caps > 0)
    tails = np.asarray(g.tails[:na], dtype=np.int64)[keep]
    heads = np.asarray(g.heads[:na], dtype=np.int64)[keep]
    k = len(keep)
    ends = {t0: t0 + length - 1 for t0, length, _u, _v in _runs(schedule, x, checkpoints)}
    R = cfg.receiver
    arrival = np.full(k, np.iinfo(np.int64).max, dtype=np.int64)
    for j, a in enumerate(keep):
        mv = g.moves[a]
        if mv is not None and mv[2] == R:
            arrival[j] = ends[mv[0]]
    cps = np.asarray(checkpoints, dtype=np.int64)
    weight = len(cps) - np.searchsorted(cps, np.minimum(arrival, cps[-1] + 1))
    incidence = coo_array(
        (np.concatenate([-np.ones(k), np.ones(k)]), (np.concatenate([tails, heads]), np.tile(np.arange(k), 2))),
        shape=(nv, k),
    ).tocsr()
    inner = np.ones(nv, dtype=bool)
    inner[[g.source, sink]] = False
    res = linprog(
        -weight.astype(np.float64),
        A_eq=incidence[inner],
        b_eq=np.zeros(int(inner.sum())),
        bounds=np.stack([np.zeros(k), caps[keep]], axis=1),
        method="highs-ds",
    )
    if res.status != 0:
        raise OracleError(f"linear program failed: {res.message}")
    values = np.rint(res.x).astype(np.int64)
    if np.abs(res.x - values).max() > 1e-6:
        raise OracleError("non-integral flow from the linear program")
    order = np.argsort(arrival, kind="stable")
    cum = np.concatenate([[0], np.cumsum(values[order])])
    upto = np.searchsorted(arrival[order], cps, side="right")
    by = {int(c): int(cum[i]) for c, i in zip(cps, upto)}
    return by, tails, heads, values


def max_deliveries(schedule, checkpoints, cfg: NetworkConfig) -> dict[int, int]:
    """Optimum at several horizons from one earliest-arrival flow."""
    checkpoints = set(checkpoints)
    by = earliest_plan(schedule, checkpoints, cfg)[1]
    if 0 in checkpoints:
        by[0] = 0
    return by


@dataclass(slots=True)
class OfflinePlan:
    value: int
    horizon: int
    schedule: list[tuple[int, int]]
    itineraries: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)
    by_round: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)

    def delivered_by(self, x: int) -> int:
        return sum(1 for hops in self.itineraries.values() if hops[-1][0] <= x)


def decompose_plan(g: TimeExpandedGraph, x: int, flow_value: int, tails, heads, values, schedule) -> OfflinePlan:
    """Turn an integral flow into per-packet itineraries.

    Layers are swept in time order. Each transfer arc with flow f moves f
    packets, oldest first, out of the tail node's holdings; the sender mints
    fresh ids, so ids follow departure order. Departures in a layer are taken
    before arrivals, matching the graph, where a transfer leaves the tail's
    previous version. The i-th unit crossing a contracted layer uses the
    layer's i-th round. Any packet left inside the network at the end means
    the flow was not conserved.
    """
    arc_ids = np.flatnonzero(np.asarray(g.caps[: g.prefix[x][1]]) > 0)
    R = g.n - 1
    plan = OfflinePlan(flow_value, x, list(schedule[:x]))
    held: dict[int, deque[int]] = {w: deque() for w in range(1, R)}
    layer: list[tuple[int, int, int, int]] = []
    packet = 0

    def flush():
        nonlocal packet
        moving = []
        for t0, a, b, f in layer:
            if a == SENDER:
                batch = list(range(packet + 1, packet + f + 1))
                packet += f
            else:
                if len(held[a]) < f:
                    raise OracleError(f"flow moves {f} packets out of node {a}, which holds {len(held[a])}")
                batch = [held[a].popleft() for _ in range(f)]
            moving.append((t0, a, b, batch))
        for t0, a, b, batch in moving:
            for i, p in enumerate(batch):
                hop = (t0 + i, a, b)
                plan.itineraries.setdefault(p, []).append(hop)
                plan.by_round.setdefault(t0 + i, []).append((p, a, b))
                if b != R:
                    held[b].append(p)
        layer.clear()

    for k in np.flatnonzero(values > 0):
        arc = int(arc_ids[k])
        mv = g.moves[arc]
        if mv is None:
            continue
        if layer and layer[0][0] != mv[0]:
            flush()
        layer.append((mv[0], mv[1], mv[2], int(values[k])))
    flush()
    delivered = sum(1 for hops in plan.itineraries.values() if hops[-1][2] == R)
    if delivered != flow_value or any(held.values()):
        raise OracleError("flow decomposition left residue")
    return plan


def earliest_plan(schedule, checkpoints, cfg: NetworkConfig) -> tuple[OfflinePlan, dict[int, int]]:
    """A plan delivering the optimum by every checkpoint, and those optima."""
    cps = sorted({int(c) for c in checkpoints if c > 0})
    if not cps:
        return OfflinePlan(0, 0, []), {}
    g = build_graph(schedule, cps[-1], cfg, cuts=cps)
    by, tails, heads, values = _earliest_arrival(g, schedule, cps, cfg)
    plan = decompose_plan(g, cps[-1], by[cps[-1]], tails, heads, values, schedule)
    return plan, by


def offline_plan(schedule, x: int, cfg: NetworkConfig) -> OfflinePlan:
    if x == 0:
        return OfflinePlan(0, 0, [])
    g = build_graph(schedule, x, cfg)
    value, tails, heads, values, _ = _solve(g, x)
    return decompose_plan(g, x, value, tails, heads, values, schedule)


def brute_force_delivery(schedule, x: int, cfg: NetworkConfig, max_n: int = 4, max_x: int = 12) -> int:
    """Exhaustive optimum over every per-round choice of what crosses the edge."""
    n, C = cfg.n, cfg.C
    if n > max_n or x > max_x:
        raise OracleError(f"instance too large for exhaustive search (n={n}, x={x})")
    R = n - 1
    edges = list(schedule[:x])

    @lru_cache(maxsize=None)
    def best(t: int, held: tuple[int, ...]) -> int:
        if t == len(edges):
            return 0
        u, v = edges[t]
        options = []
        for a, b in ((u, v), (v, u)):
            can = a != R and b != SENDER and (a == SENDER or held[a - 1] > 0)
            options.append((0, 1) if can else (0,))
        top = 0
        for fwd in options[0]:
            for back in options[1]:
                nxt = list(held)
                gained = 0
                for a, b, k in ((u, v, fwd), (v, u, back)):
                    if not k:
                        continue
                    if a != SENDER:
                        nxt[a - 1] -= 1
                    if b == R:
                        gained += 1
                    else:
                        nxt[b - 1] += 1
                if any(h > C for h in nxt):
                    continue
                top = max(top, gained + best(t + 1, tuple(nxt)))
        return top

    return best(0, (0,) * (n - 2))


@dataclass(slots=True)
class PlanNode:
    """Executes its share of an offline plan; it knows the whole schedule in advance."""

    cfg: NetworkConfig
    me: int
    rounds: list[int]
    sends: dict[int, int]
    held: set[int] = field(default_factory=set)
    k: int = 0
    received: list[int] = field(default_factory=list)

    @property
    def height(self) -> int:
        if self.me == SENDER:
            return self.cfg.sender_height
        if self.me == self.cfg.receiver:
            return self.cfg.receiver_height
        return len(self.held)

    def offer(self) -> tuple[int | None, int]:
        t = self.rounds[self.k]
        return self.sends.get(t), len(self.held)

    def step(self, sent: RequestMsg, received: RequestMsg) -> Outcome:
        self.k += 1
        tags = []
        out = Outcome()
        if sent.packet is not None:
            if self.me != SENDER:
                if sent.packet not in self.held:
                    raise RuleError(f"plan moves packet {sent.packet} from {self.me}, which does not hold it")
                self.held.remove(sent.packet)
            out.sent = sent.packet
            tags.append("insert" if self.me == SENDER else "transfer-out")
        if received.packet is not None:
            out.stored = received.packet
            if self.me == self.cfg.receiver:
                self.received.append(received.packet)
                tags.append("receive")
            else:
                self.held.add(received.packet)
                tags.append("transfer-in")
        out.tags = tuple(tags) or ("hold",)
        return out


def make_plan_nodes(cfg: NetworkConfig, plan: OfflinePlan) -> list[PlanNode]:
    rounds: dict[int, list[int]] = {w: [] for w in range(cfg.n)}
    for t, (u, v) in enumerate(plan.schedule, 1):
        rounds[u].append(t)
        rounds[v].append(t)
    sends: dict[int, dict[int, int]] = {w: {} for w in range(cfg.n)}
    for t, hops in plan.by_round.items():
        for packet, a, _b in hops:
            if t in sends[a]:
                raise OracleError(f"plan sends two packets from {a} in round {t}")
            sends[a][t] = packet
    return [PlanNode(cfg, w, rounds[w], sends[w]) for w in range(cfg.n)]
