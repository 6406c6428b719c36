from collections import Counter

import pytest

from aslide.adversaries import (AdversaryFault, CyclicAdversary, GreedyAdversary, ScheduleError, annotate_cycles,
                                bursty_schedule, format_schedule, make_adversary, parse_schedule, random_schedule,
                                read_schedule, write_schedule)
from aslide.config import NetworkConfig
from aslide.model import run


def heights_before(trace, x, m):
    return trace[x - 2].heights if x > 1 else (0,) * m


def by_height_desc(h):
    return sorted(range(1, len(h) + 1), key=lambda i: (-h[i - 1], i))


def emptier(a, b, h):
    return min((a, b), key=lambda w: (h[w - 1], w))


def replay_cyclic(trace, cfg):
    """Rebuild the cyclic schedule from the victim's recorded heights alone."""
    C, m, R = cfg.C, cfg.n - 2, cfg.receiver
    expected = []
    x = 1
    while x + (m + 1) * C - 1 <= len(trace):
        labels = by_height_desc(heights_before(trace, x, m))
        carry = labels[0]
        expected += [(0, carry)] * C
        x += C
        for i in range(1, m + 1):
            if i > 1:
                carry = emptier(carry, labels[i - 1], heights_before(trace, x, m))
            edge = (carry, labels[i]) if i < m else (carry, R)
            expected += [edge] * C
            x += C
    return expected


def replay_greedy(trace, cfg):
    C, m, R = cfg.C, cfg.n - 2, cfg.receiver
    expected, lengths = [], []
    x = 1
    while x <= len(trace):
        h = heights_before(trace, x, m)
        partner = by_height_desc(h)[0]
        expected += [(0, partner)] * C
        x += C
        hat, segs = None, 1
        while True:
            h = heights_before(trace, x, m)
            hat = partner if hat is None else emptier(hat, partner, h)
            below = [w for w in range(1, m + 1) if h[w - 1] < h[hat - 1]]
            partner = min(below, key=lambda w: (h[hat - 1] - h[w - 1], w)) if below else R
            expected += [(hat, partner)] * C
            x += C
            segs += 1
            if partner == R:
                break
        lengths.append(segs)
    return expected, lengths


def test_cyclic_first_segment_from_empty():
    cfg = NetworkConfig(8, 64)
    adv = CyclicAdversary(cfg)
    assert [adv.next_edge((0,) * 6) for _ in range(64)] == [(0, 1)] * 64


def test_cyclic_matches_rule_replay():
    cfg = NetworkConfig(5, 40)
    adv = CyclicAdversary(cfg)
    trace = run(cfg, adv, 10 * 4 * 40)
    assert [r.edge for r in trace] == replay_cyclic(trace, cfg)
    done = adv.completed_cycles()
    assert len(done) == 10
    assert all(c.length == (cfg.n - 1) * cfg.C for c in done)


def test_cyclic_annotations_match_trace():
    cfg = NetworkConfig(6, 24)
    adv = CyclicAdversary(cfg)
    trace = run(cfg, adv, 5 * 5 * 24)
    cycles = annotate_cycles(adv.completed_cycles(), trace)
    assert sum(c.delivered for c in cycles) == trace[-1].Z
    for c in cycles:
        assert len(c.moved) == cfg.n - 1
        assert c.moved[0] == trace[c.start + cfg.C - 2].Y - (trace[c.start - 2].Y if c.start > 1 else 0)


def test_greedy_equal_heights_go_straight_to_receiver():
    cfg = NetworkConfig(6, 24)
    adv = GreedyAdversary(cfg)
    edges = [adv.next_edge((0,) * 4) for _ in range(2 * 24)]
    assert edges == [(0, 1)] * 24 + [(1, 5)] * 24
    assert adv.completed_cycles()[0].segment_count(cfg.C) == 2


def test_greedy_matches_rule_replay():
    cfg = NetworkConfig(6, 24)
    adv = GreedyAdversary(cfg)
    trace = run(cfg, adv, 20 * 6 * 24)
    expected, lengths = replay_greedy(trace, cfg)
    assert [r.edge for r in trace] == expected[: len(trace)]
    done = adv.completed_cycles()
    assert len(done) >= 20
    assert [c.segment_count(cfg.C) for c in done] == lengths[: len(done)]


def test_greedy_cap_is_enforced():
    cfg = NetworkConfig(5, 20)
    adv = GreedyAdversary(cfg)
    adv.next_edge((0, 0, 0))
    adv.cycles[-1].segments *= 5  # pretend the cycle is already n segments long
    adv._left = 0
    with pytest.raises(AdversaryFault):
        adv.next_edge((3, 2, 1))


def test_random_schedule_is_seeded():
    assert random_schedule(6, 42, 500) == random_schedule(6, 42, 500)
    assert random_schedule(6, 42, 500) != random_schedule(6, 43, 500)


def test_random_edges_are_near_uniform():
    counts = Counter(random_schedule(4, 1, 10_000))
    assert len(counts) == 6
    expected = 10_000 / 6
    assert all(abs(k - expected) <= 0.05 * expected for k in counts.values())


def test_bursty_holds_edges():
    s = bursty_schedule(5, 3, 2000, 50)
    assert len(s) == 2000
    runs = 1 + sum(a != b for a, b in zip(s, s[1:]))
    assert runs < 2000 / 5


def test_schedule_round_trip(tmp_path):
    s = random_schedule(5, 7, 50)
    assert parse_schedule(format_schedule(s), 5) == s
    path = tmp_path / "s.txt"
    write_schedule(s, path)
    assert read_schedule(path, 5) == s


@pytest.mark.parametrize("text, fragment", [
    ("1 0 1\n2 0\n", "3 columns"),
    ("1 0 x\n", "non-integer"),
    ("1 0 9\n", "out of range"),
    ("1 0 1\n3 2 2\n", "out of sequence"),
    ("1 0 1\n2 2 2\n", "self-loop"),
])
def test_schedule_errors(text, fragment):
    with pytest.raises(ScheduleError, match=fragment):
        parse_schedule(text, 4)


def test_schedule_skips_comments():
    assert parse_schedule("# header\n\n1 0 3\n", 4) == [(0, 3)]


def test_make_adversary():
    cfg = NetworkConfig(4, 128)
    assert isinstance(make_adversary("cyclic", cfg), CyclicAdversary)
    assert make_adversary("replay", cfg, schedule=[(0, 1)]).next_edge() == (0, 1)
    with pytest.raises(ValueError):
        make_adversary("replay", cfg)
    with pytest.raises(ValueError):
        make_adversary("chaotic", cfg)
