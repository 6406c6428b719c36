"""Rounds, request buffers, trace records, and the round loop."""
from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .config import SENDER, NetworkConfig, validate_config

log = logging.getLogger(__name__)


class RuleError(RuntimeError):
    """Raised inside a node rule; the round loop rewraps it with the round index."""


class ProtocolFault(RuntimeError):
    """A rule produced loss, duplication, or a capacity breach."""

    def __init__(self, x: int, message: str):
        super().__init__(f"round {x}: {message}")
        self.x = x


@dataclass(frozen=True, slots=True)
class RequestMsg:
    src: int
    dst: int
    packet: int | None
    height: int


@dataclass(slots=True)
class Outcome:
    """What one endpoint did in a round.

    ``sent`` left this node because the peer stored it; ``stored`` arrived
    from the peer. Positions are stack slots (1-based) used by drop audits:
    ``sent_pos`` is the slot the packet held when it was offered and
    ``stored_pos`` the slot it landed in.
    """

    tags: tuple[str, ...] = ()
    sent: int | None = None
    stored: int | None = None
    sent_pos: int | None = None
    stored_pos: int | None = None
    used_height: int | None = None


@dataclass(frozen=True, slots=True)
class Move:
    packet: int
    src: int
    dst: int
    kind: str  # insert | transfer | deliver | direct
    drop: int | None = None


@dataclass(slots=True)
class EventRecord:
    x: int
    edge: tuple[int, int]
    delivered: tuple[int | None, int | None]
    actions: tuple[tuple[str, ...], tuple[str, ...]]
    moves: tuple[Move, ...]
    heights: tuple[int, ...]
    Y: int
    Z: int
    T: int
    decision: tuple[int | None, int | None] | None = None
    ghosts: tuple[int, ...] | None = None
    outstanding: tuple[int, ...] | None = None
    queued: int | None = None

    def to_json(self) -> str:
        d = {
            "x": self.x,
            "edge": list(self.edge),
            "delivered": list(self.delivered),
            "actions": [list(a) for a in self.actions],
            "moves": [[m.packet, m.src, m.dst, m.kind, m.drop] for m in self.moves],
            "heights": list(self.heights),
            "Y": self.Y,
            "Z": self.Z,
            "T": self.T,
        }
        for key in ("decision", "ghosts", "outstanding", "queued"):
            value = getattr(self, key)
            if value is not None:
                d[key] = list(value) if isinstance(value, tuple) else value
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        d = json.loads(line)
        opt = lambda k: tuple(d[k]) if d.get(k) is not None else None  # noqa: E731
        return cls(
            x=d["x"],
            edge=tuple(d["edge"]),
            delivered=tuple(d["delivered"]),
            actions=tuple(tuple(a) for a in d["actions"]),
            moves=tuple(Move(*m) for m in d["moves"]),
            heights=tuple(d["heights"]),
            Y=d["Y"],
            Z=d["Z"],
            T=d["T"],
            decision=opt("decision"),
            ghosts=opt("ghosts"),
            outstanding=opt("outstanding"),
            queued=d.get("queued"),
        )


Trace = list[EventRecord]


def write_trace(records: Iterable[EventRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_trace(path: str | Path) -> Trace:
    with open(path) as fh:
        return [EventRecord.from_json(line) for line in fh if line.strip()]


class AdversaryBuffer:
    """FIFO request queues, one per directed edge."""

    def __init__(self):
        self.pending: dict[tuple[int, int], deque[RequestMsg]] = {}

    def pop(self, src: int, dst: int) -> RequestMsg | None:
        q = self.pending.get((src, dst))
        return q.popleft() if q else None

    def push(self, msg: RequestMsg) -> int:
        q = self.pending.setdefault((msg.src, msg.dst), deque())
        q.append(msg)
        return len(q)

    def __len__(self) -> int:
        return sum(len(q) for q in self.pending.values())


class SemiAsyncNode(Protocol):
    height: int

    def offer(self) -> tuple[int | None, int]: ...

    def step(self, sent: RequestMsg, received: RequestMsg) -> Outcome: ...


class FullyAsyncNode(Protocol):
    height: int

    def on_honored(self, peer: int, delivered: RequestMsg | None) -> tuple[Outcome, RequestMsg | None]: ...


@dataclass(slots=True)
class NetworkState:
    cfg: NetworkConfig
    nodes: list
    buffer: AdversaryBuffer | None = None
    x: int = 0
    inserted: int = 0
    received: int = 0
    transfers: int = 0
    plan: object = None

    def heights(self) -> tuple[int, ...]:
        return tuple(self.nodes[i].height for i in self.cfg.internal)


def _moves(net: NetworkState, x: int, u: int, v: int, out_u: Outcome, out_v: Outcome) -> tuple[Move, ...]:
    """Pair each departure with its arrival; anything unmatched is loss or duplication."""
    cfg = net.cfg
    moves = []
    for a, b, oa, ob in ((u, v, out_u, out_v), (v, u, out_v, out_u)):
        if oa.sent != ob.stored:
            raise ProtocolFault(x, f"{a}->{b}: sender released {oa.sent}, receiver stored {ob.stored}")
        if oa.sent is None:
            continue
        if a == SENDER:
            kind = "direct" if b == cfg.receiver else "insert"
        elif b == cfg.receiver:
            kind = "deliver"
        elif b == SENDER:
            raise ProtocolFault(x, f"packet {oa.sent} moved into the sender")
        else:
            kind = "transfer"
        drop = None
        if oa.sent_pos is not None and ob.stored_pos is not None:
            drop = oa.sent_pos - ob.stored_pos
        moves.append(Move(oa.sent, a, b, kind, drop))
        if a == SENDER:
            net.inserted += 1
        else:
            net.transfers += 1
        if b == cfg.receiver:
            net.received += 1
    return tuple(moves)


def _check_capacity(net: NetworkState, x: int, *nodes: int) -> None:
    for w in nodes:
        if net.cfg.is_internal(w) and not 0 <= net.nodes[w].height <= net.cfg.C:
            raise ProtocolFault(x, f"node {w} height {net.nodes[w].height} outside [0, {net.cfg.C}]")


def honor_edge_semi_async(net: NetworkState, u: int, v: int) -> EventRecord:
    net.x += 1
    x = net.x
    a, b = net.nodes[u], net.nodes[v]
    pu, hu = a.offer()
    pv, hv = b.offer()
    msg_u, msg_v = RequestMsg(u, v, pu, hu), RequestMsg(v, u, pv, hv)
    out_u = a.step(msg_u, msg_v)
    out_v = b.step(msg_v, msg_u)
    moves = _moves(net, x, u, v, out_u, out_v)
    _check_capacity(net, x, u, v)
    return EventRecord(x, (u, v), (pu, pv), (out_u.tags, out_v.tags), moves, net.heights(),
                       net.inserted, net.received, net.transfers)


def honor_edge_fully_async(net: NetworkState, u: int, v: int) -> EventRecord:
    net.x += 1
    x = net.x
    buf = net.buffer
    to_v, to_u = buf.pop(u, v), buf.pop(v, u)
    out_u, req_u = net.nodes[u].on_honored(v, to_u)
    out_v, req_v = net.nodes[v].on_honored(u, to_v)
    queued = 0
    for req in (req_u, req_v):
        if req is not None:
            queued = max(queued, buf.push(req))
    moves = _moves(net, x, u, v, out_u, out_v)
    _check_capacity(net, x, u, v)
    decision = None
    if out_u.used_height is not None or out_v.used_height is not None:
        decision = (out_u.used_height, out_v.used_height)
    internal = [net.nodes[i] for i in net.cfg.internal]
    return EventRecord(
        x, (u, v),
        (to_v.packet if to_v else None, to_u.packet if to_u else None),
        (out_u.tags, out_v.tags), moves, net.heights(),
        net.inserted, net.received, net.transfers,
        decision=decision,
        ghosts=tuple(getattr(w, "ghosts", 0) for w in internal),
        outstanding=tuple(getattr(w, "outstanding", 0) for w in internal),
        queued=queued,
    )


def build_network(cfg: NetworkConfig, plan=None) -> NetworkState:
    if cfg.protocol == "slide":
        from .slide import make_nodes
        return NetworkState(cfg, make_nodes(cfg))
    if cfg.protocol == "slide-plus":
        from .slideplus import make_nodes
        return NetworkState(cfg, make_nodes(cfg), AdversaryBuffer())
    if cfg.protocol == "offline-plan":
        if plan is None:
            raise ValueError("offline-plan protocol needs a plan")
        from .oracle import make_plan_nodes
        return NetworkState(cfg, make_plan_nodes(cfg, plan), plan=plan)
    raise ValueError(f"unknown protocol {cfg.protocol!r}")


def honor(net: NetworkState, u: int, v: int) -> EventRecord:
    try:
        if net.buffer is not None:
            return honor_edge_fully_async(net, u, v)
        return honor_edge_semi_async(net, u, v)
    except RuleError as exc:
        raise ProtocolFault(net.x, str(exc)) from exc


def run(
    cfg: NetworkConfig,
    adversary,
    max_rounds: int,
    *,
    plan=None,
    sink: Callable[[EventRecord], None] | None = None,
    validate: bool = True,
) -> Trace:
    """Drive ``adversary`` against ``cfg.protocol`` for up to ``max_rounds`` rounds.

    The adversary sees the internal height vector before each round and may
    return ``None`` to end the run early (a replayed schedule ran out).
    """
    if max_rounds <= 0:
        raise ValueError("max_rounds must be positive")
    if validate:
        validate_config(cfg)
    net = build_network(cfg, plan)
    trace: Trace = []
    for _ in range(max_rounds):
        edge = adversary.next_edge(net.heights())
        if edge is None:
            break
        u, v = edge
        if u == v or not (0 <= u < cfg.n and 0 <= v < cfg.n):
            raise ValueError(f"invalid edge {edge}")
        rec = honor(net, u, v)
        trace.append(rec)
        if sink is not None:
            sink(rec)
    log.debug("run finished after %d rounds: Y=%d Z=%d T=%d", net.x, net.inserted, net.received, net.transfers)
    return trace


def schedule_of(trace: Trace) -> list[tuple[int, int]]:
    return [rec.edge for rec in trace]
