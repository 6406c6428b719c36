import pytest
from hypothesis import given, settings, strategies as st

from aslide.adversaries import ReplayAdversary
from aslide.checks import check_slide_trace
from aslide.config import NetworkConfig
from aslide.model import RequestMsg, RuleError, run
from aslide.slide import ReceiverState, SenderState, SlideNodeState, internal_step, receiver_step, sender_step

CFG = NetworkConfig(8, 64)


def msg(packet, height, src=1, dst=2):
    return RequestMsg(src, dst, packet, height)


@pytest.mark.parametrize("h, inserted", [(0, True), (63, True), (64, False)])
def test_sender_inserts_below_capacity(h, inserted):
    s = SenderState(CFG)
    out, nxt = sender_step(s, msg(None, h, src=3, dst=0))
    assert (out.sent == 1) is inserted
    assert nxt.packet == (2 if inserted else 1)
    assert nxt.height == CFG.sender_height == 71


def test_receiver_collects_and_rejects_duplicates():
    r = ReceiverState(CFG)
    out, nxt = receiver_step(r, msg(5, 12))
    assert r.received == [5] and out.stored == 5
    assert (nxt.packet, nxt.height) == (None, -8)
    receiver_step(r, msg(None, 3))
    assert r.received == [5]
    with pytest.raises(RuleError, match="twice"):
        receiver_step(r, msg(5, 1))


def node_with(height):
    return SlideNodeState(CFG, list(range(100, 100 + height)))


def test_pop_when_well_above():
    node = node_with(10)
    out, nxt = internal_step(node, msg(109, 10), msg(None, 1))
    assert out.sent == 109 and node.height == 9
    assert (nxt.packet, nxt.height) == (108, 9)


def test_hold_when_close():
    node = node_with(5)
    out, _ = internal_step(node, msg(104, 5), msg(7, 5))
    assert out.tags == ("hold",) and node.height == 5


def test_push_when_well_below():
    node = node_with(0)
    out, nxt = internal_step(node, msg(None, 0), msg(7, 9))
    assert out.stored == 7 and node.stack == [7]
    assert (nxt.packet, nxt.height) == (7, 1)


def test_pop_must_match_top():
    node = node_with(10)
    with pytest.raises(RuleError, match="top of stack"):
        internal_step(node, msg(100, 10), msg(None, 0))


def test_full_stack_push_is_a_fault():
    node = node_with(64)
    node.stack.pop()
    node.stack.append(1)  # still 64 packets
    with pytest.raises(RuleError, match="full"):
        internal_step(node, msg(1, 64 - 8), msg(5, 64))


def test_filo_order_end_to_end():
    # S fills node 1 with packets 1..3; node 1 then hands its newest to the receiver first.
    trace = run(CFG, ReplayAdversary([(0, 1)] * 3 + [(1, 7)] * 3), 6)
    delivered = [m.packet for rec in trace[3:] for m in rec.moves]
    assert delivered == [3, 2, 1]


edges = st.sampled_from([(a, b) for a in range(6) for b in range(a + 1, 6)])


@settings(max_examples=60, deadline=None)
@given(st.lists(edges, min_size=1, max_size=400), st.sampled_from([12, 18, 30]))
def test_replayed_invariants_hold(schedule, C):
    cfg = NetworkConfig(6, C)
    trace = run(cfg, ReplayAdversary(schedule), len(schedule))
    assert check_slide_trace(trace, cfg) == []


@settings(max_examples=40, deadline=None)
@given(st.lists(edges, min_size=1, max_size=200))
def test_sender_and_receiver_dominance(schedule):
    cfg = NetworkConfig(6, 12)
    trace = run(cfg, ReplayAdversary(schedule), len(schedule))
    prev = (0,) * 4
    for rec in trace:
        u, v = rec.edge
        for a, b in ((u, v), (v, u)):
            if a == 0 and cfg.is_internal(b) and prev[b - 1] <= cfg.C - 1:
                assert any(m.src == 0 for m in rec.moves)
            if b == cfg.receiver and cfg.is_internal(a) and prev[a - 1] >= 1:
                assert any(m.dst == b for m in rec.moves)
        prev = rec.heights
