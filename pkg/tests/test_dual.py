import pytest

from aslide.adversaries import CyclicAdversary, GreedyAdversary, ReplayAdversary, bursty_schedule
from aslide.config import NetworkConfig
from aslide.dual import checkpoint_bounds, classify_deliveries, dual_run, fresh_vs_inserted, phi_evolution


@pytest.fixture(scope="module")
def plus_dual():
    cfg = NetworkConfig(4, 128, "fully-async", "slide-plus")
    return dual_run(cfg, ReplayAdversary(bursty_schedule(4, 5, 3000, 256)), 3000)


@pytest.fixture(scope="module")
def slide_dual():
    cfg = NetworkConfig(6, 24)
    return dual_run(cfg, CyclicAdversary(cfg), 3000)


def assert_partition(dual, cls):
    delivered = {p for p, hops in dual.plan.itineraries.items() if hops[-1][2] == dual.cfg.receiver}
    sets = (cls.co_moved, cls.fresh, cls.stale)
    assert sum(len(s) for s in sets) == len(delivered)
    assert set().union(*sets) == delivered


def test_plan_is_optimal_at_each_checkpoint(plus_dual):
    assert plus_dual.plan_trace[-1].Z == plus_dual.plan.value == plus_dual.optimum[3000]
    for x, best in plus_dual.optimum.items():
        assert plus_dual.plan_trace[x - 1].Z == best


def test_classification_partitions_deliveries(plus_dual, slide_dual):
    for dual in (plus_dual, slide_dual):
        cls = classify_deliveries(dual)
        assert_partition(dual, cls)


def test_stale_packets_have_witnesses(plus_dual):
    cls = classify_deliveries(plus_dual)
    n = plus_dual.cfg.n
    assert cls.shortfall == 0
    for packet, ws in cls.witnesses.items():
        t, a, b = cls.stale_hop[packet]
        assert len(ws) == n
        assert all(cls.move_rounds[w] < t for w in ws)


def test_semi_async_runs_have_no_stale_deliveries(slide_dual):
    cls = classify_deliveries(slide_dual)
    assert not cls.stale and cls.fresh


def test_checkpoint_bounds_hold(plus_dual, slide_dual):
    for dual in (plus_dual, slide_dual):
        bounds = checkpoint_bounds(dual, range(100, dual.horizon + 1, 100))
        assert bounds and all(b.ok for b in bounds)
        rec = bounds[-1].as_record()
        assert rec["pass"] and rec["bounds"]["total"]["rhs"] == 8 * dual.cfg.n * rec["online"] + 8 * dual.cfg.n ** 2 * dual.cfg.C


def test_nothing_delivered_means_empty_classes():
    cfg = NetworkConfig(6, 24)
    dual = dual_run(cfg, ReplayAdversary([(0, 1), (1, 2), (2, 3)] * 10), 30)
    cls = classify_deliveries(dual)
    assert dual.plan.value == 0
    assert not (cls.co_moved or cls.fresh or cls.stale)


def test_potential_starts_at_zero_and_credits_4c_per_move():
    cfg = NetworkConfig(6, 24)
    dual = dual_run(cfg, ReplayAdversary([(0, 1)]), 1)
    ledger = phi_evolution(dual)
    assert ledger.values == [0, 4 * cfg.C]
    assert ledger.log == [(1, "transfer", 4 * cfg.C)]


def test_potential_ledger_stays_above_family_bound(slide_dual):
    ledger = phi_evolution(slide_dual)
    assert ledger.values[0] == 0
    assert all(v >= w >= 0 for v, w in zip(ledger.values, ledger.weighted))
    moves = sum(len(r.moves) for r in slide_dual.trace)
    credited = sum(d for _, src, d in ledger.log if src == "transfer")
    assert credited == 4 * slide_dual.cfg.C * moves


def test_literal_form_breaks_only_before_the_second_move():
    cfg = NetworkConfig(8, 64)
    dual = dual_run(cfg, GreedyAdversary(cfg), 4000)
    ledger = phi_evolution(dual)
    assert all(x < ledger.first_second_move for x in ledger.literal_breaks)


def test_fresh_deliveries_bounded_by_insertions(slide_dual):
    cls = classify_deliveries(slide_dual)
    for x, fresh, limit in fresh_vs_inserted(slide_dual, cls, range(50, 3001, 50)):
        assert fresh <= limit


def test_ledger_needs_semi_async(plus_dual):
    with pytest.raises(ValueError):
        phi_evolution(plus_dual)

