"""Height-differential routing for the semi-asynchronous model.

Each awakened node offers its top packet with its height. A node pops its
offer when it stands at least C/n above the peer and pushes the peer's offer
when it stands at least C/n below; otherwise nothing moves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .config import NetworkConfig
from .model import Outcome, RequestMsg, RuleError


@dataclass(slots=True)
class SenderState:
    cfg: NetworkConfig
    next_id: int = 1

    @property
    def height(self) -> int:
        return self.cfg.sender_height

    @property
    def pending(self) -> int:
        return self.next_id

    def offer(self) -> tuple[int | None, int]:
        return self.next_id, self.cfg.sender_height

    def step(self, sent: RequestMsg, received: RequestMsg) -> Outcome:
        return sender_step(self, received)[0]


@dataclass(slots=True)
class ReceiverState:
    cfg: NetworkConfig
    received: list[int] = field(default_factory=list)
    seen: set[int] = field(default_factory=set)

    @property
    def height(self) -> int:
        return self.cfg.receiver_height

    def offer(self) -> tuple[int | None, int]:
        return None, self.cfg.receiver_height

    def step(self, sent: RequestMsg, received: RequestMsg) -> Outcome:
        return receiver_step(self, received)[0]


@dataclass(slots=True)
class SlideNodeState:
    cfg: NetworkConfig
    stack: list[int] = field(default_factory=list)

    @property
    def height(self) -> int:
        return len(self.stack)

    def offer(self) -> tuple[int | None, int]:
        return (self.stack[-1] if self.stack else None), len(self.stack)

    def step(self, sent: RequestMsg, received: RequestMsg) -> Outcome:
        return internal_step(self, sent, received)[0]


def sender_step(sender: SenderState, received: RequestMsg) -> tuple[Outcome, RequestMsg]:
    cfg = sender.cfg
    offered = sender.next_id
    if received.height < cfg.C:
        sender.next_id += 1
        out = Outcome(("insert",), sent=offered, sent_pos=cfg.sender_height)
    else:
        out = Outcome(("hold",))
    return out, RequestMsg(0, received.src, sender.next_id, cfg.sender_height)


def receiver_step(recv: ReceiverState, received: RequestMsg) -> tuple[Outcome, RequestMsg]:
    cfg = recv.cfg
    p = received.packet
    if p is None:
        out = Outcome(("hold",))
    else:
        if p in recv.seen:
            raise RuleError(f"receiver got packet {p} twice")
        recv.seen.add(p)
        recv.received.append(p)
        out = Outcome(("receive",), stored=p, stored_pos=cfg.receiver_height + 1)
    return out, RequestMsg(cfg.receiver, received.src, None, cfg.receiver_height)


def internal_step(node: SlideNodeState, sent: RequestMsg, received: RequestMsg) -> tuple[Outcome, RequestMsg]:
    gap = node.cfg.gap
    H, h = sent.height, received.height
    if H >= h + gap:
        if sent.packet is None:
            out = Outcome(("hold",))
        else:
            top = node.stack.pop()
            if top != sent.packet:
                raise RuleError(f"offered {sent.packet} but top of stack was {top}")
            out = Outcome(("transfer-out",), sent=top, sent_pos=H)
    elif H <= h - gap:
        if received.packet is None:
            out = Outcome(("hold",))
        else:
            if len(node.stack) >= node.cfg.C:
                raise RuleError("push onto a full stack")
            node.stack.append(received.packet)
            out = Outcome(("transfer-in",), stored=received.packet, stored_pos=len(node.stack))
    else:
        out = Outcome(("hold",))
    p, height = node.offer()
    return out, RequestMsg(sent.src, sent.dst, p, height)


def make_nodes(cfg: NetworkConfig) -> list:
    return [SenderState(cfg)] + [SlideNodeState(cfg) for _ in cfg.internal] + [ReceiverState(cfg)]
