"""Height-differential routing on stale heights, for the fully asynchronous model.

Every request a node sends on edge (u, v) is remembered together with the
height it advertised. At the next honoring of (u, v) both endpoints compare
the two remembered heights, so they reach mirrored keep/delete decisions even
though the heights may be out of date. A ghost slot reserved at request time
guarantees the incoming packet a place at a known height.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

from .config import SENDER, NetworkConfig
from .model import Outcome, RequestMsg, RuleError


class Ghost(NamedTuple):
    peer: int


class Record(NamedTuple):
    packet: int | None
    height: int
    pos: int | None  # slot of ``packet`` when it was offered


class SlotStack:
    """Packets and ghosts packed from slot 1 upward; removals slide everything above down."""

    __slots__ = ("capacity", "cells", "height", "ghosts")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.cells: list[int | Ghost] = []
        self.height = 0
        self.ghosts = 0

    def _index(self, item) -> int:
        cells = self.cells
        for i in range(len(cells) - 1, -1, -1):
            if cells[i] == item:
                return i
        raise RuleError(f"{item!r} not in stack")

    def position(self, item) -> int:
        return self._index(item) + 1

    def has_room(self) -> bool:
        return len(self.cells) < self.capacity

    def remove_packet(self, packet: int) -> None:
        del self.cells[self._index(packet)]
        self.height -= 1

    def remove_ghost(self, peer: int) -> None:
        del self.cells[self._index(Ghost(peer))]
        self.ghosts -= 1

    def fill_ghost(self, peer: int, packet: int) -> int:
        i = self._index(Ghost(peer))
        self.cells[i] = packet
        self.ghosts -= 1
        self.height += 1
        return i + 1

    def add_ghost(self, peer: int) -> int:
        if not self.has_room():
            raise RuleError("no free slot for a ghost")
        self.cells.append(Ghost(peer))
        self.ghosts += 1
        return len(self.cells)

    def highest_uncommitted(self, committed) -> tuple[int | None, int | None]:
        cells = self.cells
        for i in range(len(cells) - 1, -1, -1):
            c = cells[i]
            if not isinstance(c, Ghost) and c not in committed:
                return c, i + 1
        return None, None

    def packets(self) -> list[int]:
        return [c for c in self.cells if not isinstance(c, Ghost)]


@dataclass(slots=True)
class PlusSender:
    cfg: NetworkConfig
    ledger: dict[int, Record] = field(default_factory=dict)
    fresh: int = 1
    returned: list[int] = field(default_factory=list)

    @property
    def height(self) -> int:
        return self.cfg.sender_height

    @property
    def outstanding(self) -> int:
        return len(self.ledger)

    def _next_packet(self) -> int:
        if self.returned:
            return heapq.heappop(self.returned)
        p = self.fresh
        self.fresh += 1
        return p

    def on_honored(self, peer: int, delivered: RequestMsg | None) -> tuple[Outcome, RequestMsg]:
        cfg = self.cfg
        rec = self.ledger.pop(peer, None)
        out = Outcome(("hold",))
        if rec is not None:
            if delivered is None:
                raise RuleError(f"sender expected a reply from {peer}")
            if delivered.height < cfg.C:
                out = Outcome(("insert",), sent=rec.packet, sent_pos=cfg.sender_height,
                              used_height=cfg.sender_height)
            else:
                heapq.heappush(self.returned, rec.packet)
                out = Outcome(("hold",), used_height=cfg.sender_height)
        p = self._next_packet()
        self.ledger[peer] = Record(p, cfg.sender_height, cfg.sender_height)
        return out, RequestMsg(SENDER, peer, p, cfg.sender_height)


@dataclass(slots=True)
class PlusReceiver:
    cfg: NetworkConfig
    received: list[int] = field(default_factory=list)
    seen: set[int] = field(default_factory=set)

    @property
    def height(self) -> int:
        return self.cfg.receiver_height

    def on_honored(self, peer: int, delivered: RequestMsg | None) -> tuple[Outcome, RequestMsg]:
        cfg = self.cfg
        out = Outcome(("hold",))
        if delivered is not None:
            out.used_height = cfg.receiver_height
            p = delivered.packet
            if p is not None:
                if p in self.seen:
                    raise RuleError(f"receiver got packet {p} twice")
                self.seen.add(p)
                self.received.append(p)
                out = Outcome(("receive",), stored=p, stored_pos=cfg.receiver_height + 1,
                              used_height=cfg.receiver_height)
        return out, RequestMsg(cfg.receiver, peer, None, cfg.receiver_height)


@dataclass(slots=True)
class PlusNode:
    cfg: NetworkConfig
    me: int
    stack: SlotStack = None
    ledger: dict[int, Record] = field(default_factory=dict)
    committed: set[int] = field(default_factory=set)

    def __post_init__(self):
        if self.stack is None:
            self.stack = SlotStack(self.cfg.C)

    @property
    def height(self) -> int:
        return self.stack.height

    @property
    def ghosts(self) -> int:
        return self.stack.ghosts

    @property
    def outstanding(self) -> int:
        return len(self.ledger)

    def on_honored(self, peer: int, delivered: RequestMsg | None) -> tuple[Outcome, RequestMsg]:
        cfg = self.cfg
        stack = self.stack
        rec = self.ledger.pop(peer, None)
        tags: list[str] = []
        out = Outcome()
        if rec is not None:
            if delivered is None:
                raise RuleError(f"node {self.me} expected a reply from {peer}")
            if rec.packet is not None:
                self.committed.discard(rec.packet)
            out.used_height = H = rec.height
            h = delivered.height
            if peer == SENDER:
                # Mirror of the sender's own test, so both sides agree.
                send, store = False, H < cfg.C
            else:
                send, store = H >= h + cfg.plus_gap, H <= h - cfg.plus_gap
            has_ghost = Ghost(peer) in stack.cells
            if send and rec.packet is not None:
                stack.remove_packet(rec.packet)
                out.sent, out.sent_pos = rec.packet, rec.pos
                tags.append("transfer-out")
            if store and delivered.packet is not None:
                if not has_ghost:
                    raise RuleError(f"node {self.me} must store from {peer} but holds no ghost")
                out.stored = delivered.packet
                out.stored_pos = stack.fill_ghost(peer, delivered.packet)
                tags += ["transfer-in", "ghost-consume"]
            elif has_ghost:
                stack.remove_ghost(peer)
                tags.append("ghost-delete")
        packet, pos = stack.highest_uncommitted(self.committed)
        advertised = stack.height
        if stack.has_room():
            stack.add_ghost(peer)
            tags.append("ghost-create")
        elif peer == SENDER:
            # Without a landing slot the node must refuse the sender's packet.
            advertised = cfg.C
        if packet is not None:
            self.committed.add(packet)
        self.ledger[peer] = Record(packet, advertised, pos)
        out.tags = tuple(tags) or ("hold",)
        return out, RequestMsg(self.me, peer, packet, advertised)


def make_nodes(cfg: NetworkConfig) -> list:
    return [PlusSender(cfg)] + [PlusNode(cfg, i) for i in cfg.internal] + [PlusReceiver(cfg)]
