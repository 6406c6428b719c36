import pytest
from hypothesis import given, settings, strategies as st

from aslide.adversaries import RandomAdversary, ReplayAdversary
from aslide.checks import audit_transfer_drop, check_slide_plus_trace
from aslide.config import NetworkConfig
from aslide.model import RequestMsg, RuleError, run
from aslide.slideplus import Ghost, PlusNode, PlusReceiver, PlusSender, Record, SlotStack

CFG = NetworkConfig(4, 128, "fully-async", "slide-plus")  # transfer threshold 24


def primed(height, peer=2):
    """Node 1 holding packets 1..height, with an outstanding offer of its top packet to ``peer``."""
    node = PlusNode(CFG, 1)
    node.stack.cells = list(range(1, height + 1))
    node.stack.height = height
    if height:
        node.committed.add(height)
    node.stack.add_ghost(peer)
    node.ledger[peer] = Record(height or None, height, height or None)
    return node


def test_delete_when_recorded_well_above():
    node = primed(60)
    out, req = node.on_honored(2, RequestMsg(2, 1, 500, 10))
    assert out.sent == 60 and node.height == 59
    assert "transfer-out" in out.tags and "ghost-delete" in out.tags
    assert node.ghosts == 1  # the fresh reservation for the next offer
    assert (req.packet, req.height) == (59, 59)


def test_store_into_ghost_slot_when_well_below():
    node = primed(10)
    slot = node.stack.position(Ghost(2))
    out, _ = node.on_honored(2, RequestMsg(2, 1, 500, 60))
    assert out.stored == 500 and out.stored_pos == slot == 11
    assert node.height == 11 and node.stack.cells[10] == 500
    assert "ghost-consume" in out.tags


def test_keep_and_drop_ghost_when_close():
    node = primed(30)
    out, _ = node.on_honored(2, RequestMsg(2, 1, 500, 20))
    assert out.sent is None and out.stored is None and node.height == 30
    assert "ghost-delete" in out.tags


def test_first_honoring_only_offers():
    node = PlusNode(CFG, 1)
    out, req = node.on_honored(2, None)
    assert out.tags == ("ghost-create",)
    assert (req.packet, req.height) == (None, 0)
    assert node.outstanding == 1


def test_reply_expected_once_recorded():
    node = primed(5)
    with pytest.raises(RuleError, match="expected a reply"):
        node.on_honored(2, None)


def test_committed_packets_are_not_offered_twice():
    node = primed(3, peer=2)
    _, req = node.on_honored(3, None)
    assert req.packet == 2


def test_full_node_refuses_the_sender():
    node = PlusNode(CFG, 1)
    node.stack.cells = list(range(1, 129))
    node.stack.height = 128
    _, req = node.on_honored(0, None)
    assert req.height == 128 and node.ghosts == 0


def test_slot_stack_bounds():
    s = SlotStack(2)
    s.add_ghost(1)
    s.add_ghost(2)
    with pytest.raises(RuleError, match="no free slot"):
        s.add_ghost(3)
    s.remove_ghost(1)
    assert s.cells == [Ghost(2)]


def test_sender_reoffers_refused_packets_first():
    s = PlusSender(CFG)
    _, first = s.on_honored(1, None)
    _, second = s.on_honored(2, None)
    out, again = s.on_honored(1, RequestMsg(1, 0, None, 128))
    assert out.sent is None and again.packet == first.packet
    out, nxt = s.on_honored(2, RequestMsg(2, 0, None, 0))
    assert out.sent == second.packet and nxt.packet == 3


def test_receiver_faults_on_duplicates():
    r = PlusReceiver(CFG)
    r.on_honored(1, RequestMsg(1, 3, 9, 4))
    with pytest.raises(RuleError, match="twice"):
        r.on_honored(2, RequestMsg(2, 3, 9, 4))


def test_empty_trace_audit_is_vacuous():
    audit = audit_transfer_drop([])
    assert audit.transfers == 0 and audit.holds(10**9)


def test_long_random_run_is_clean():
    trace = run(CFG, RandomAdversary(4, 21), 20_000)
    assert check_slide_plus_trace(trace, CFG) == []
    assert audit_transfer_drop(trace).holds(CFG.gap - 4 * CFG.n)


edges = st.sampled_from([(a, b) for a in range(4) for b in range(a + 1, 4)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(edges, st.integers(1, 80)), min_size=1, max_size=60))
def test_bursty_replays_are_clean(bursts):
    schedule = [e for e, k in bursts for _ in range(k)]
    trace = run(CFG, ReplayAdversary(schedule), len(schedule))
    assert check_slide_plus_trace(trace, CFG) == []
    for rec in trace:
        assert max(rec.ghosts) <= CFG.n and max(rec.outstanding) <= CFG.n
