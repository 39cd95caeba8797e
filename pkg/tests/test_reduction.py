import numpy as np
import pytest

from helpers import floyd, random_instance
from udgfl.graph import build_udg
from udgfl.instance import FLInstance, evaluate, exact_solve
from udgfl.reduction import (
    AspectPartitionError, CreditLedger, aspect_bound_for, baseline_approx, filter_clients, merge_solutions,
    partition_by_aspect, primal_dual, r_for,
)


def test_primal_dual_single_column():
    D = np.array([[0.5], [1.0]])
    assert primal_dual(D, np.array([2.0])) == [0]


def test_baseline_single_facility(rng):
    inst = random_instance(rng, n_fac=(1, 2))
    base = baseline_approx(inst, 0.5)
    assert base.open == inst.facilities
    assert sorted(base.cluster[inst.facilities[0]]) == list(inst.clients)


def test_baseline_prefers_cheaper_of_two_colocated():
    g = build_udg([(0, 0), (1e-4, 0), (0.5, 0)])
    inst = FLInstance(g, [2], {0: 2.0, 1: 1.0})
    assert baseline_approx(inst, 1.0).open == (1,)


def test_baseline_clusters_and_avgcost(rng):
    for _ in range(10):
        inst = random_instance(rng)
        base = baseline_approx(inst, 0.5)
        seen = sorted(j for cl in base.cluster.values() for j in cl)
        assert seen == list(inst.clients)
        assert all(base.cluster.values())
        D = floyd(inst.graph.points)
        for i, cl in base.cluster.items():
            want = (inst.costs[i] + sum(D[j, i] for j in cl)) / len(cl)
            assert base.avgcost[i] == pytest.approx(want)
            # each client is clustered at its nearest opened facility
            for j in cl:
                assert D[j, i] <= min(D[j, k] for k in base.open) + 1e-9


def test_baseline_ratio_on_scaled_instance(rng):
    for _ in range(10):
        inst = random_instance(rng, n_fac=(2, 10))
        scaled = inst.scaled(0.5)
        base = baseline_approx(inst, 0.5)
        opt = exact_solve(scaled).total_cost
        assert base.scaled_cost <= 3 * opt + 1e-9


def test_baseline_anchor_near_optimum(rng):
    # every baseline facility has an optimal facility within twice its average cost
    for _ in range(15):
        inst = random_instance(rng, n_fac=(2, 9))
        base = baseline_approx(inst, 1.0)
        opt = exact_solve(inst)
        D = floyd(inst.graph.points)
        for i in base.open:
            assert min(D[i, g] for g in opt.open) <= 2 * base.avgcost[i] + 1e-9


def test_baseline_rejects_bad_scale(rng):
    with pytest.raises(ValueError):
        baseline_approx(random_instance(rng), 0.0)


def test_filter_keeps_clients_in_band(rng):
    for _ in range(10):
        inst = random_instance(rng)
        base = baseline_approx(inst, 0.5)
        Ip, ledger = filter_clients(inst, base, 0.5)
        anchor = base.anchor_of
        for j in Ip.clients:
            a = base.avgcost[anchor[j]]
            assert 0.25 * a - 1e-9 <= base.distance[j] <= 4 * a + 1e-9
        assert sorted(set(Ip.clients) | set(ledger.entries)) == list(inst.clients)
        assert not set(Ip.clients) & set(ledger.entries)


def test_filter_removes_client_on_its_anchor():
    g = build_udg([(0, 0), (0.6, 0)])
    inst = FLInstance(g, [0, 1], {0: 1.0})
    base = baseline_approx(inst, 0.5)
    Ip, ledger = filter_clients(inst, base, 0.5)
    assert ledger.entries[0] == (0, 0.0, "near")
    assert Ip.clients == (1,)


def test_filter_noop_when_all_in_band():
    g = build_udg([(0, 0), (0.5, 0), (-0.5, 0)])
    inst = FLInstance(g, [1, 2], {0: 1.0})
    Ip, ledger = filter_clients(inst, baseline_approx(inst, 0.5), 0.5)
    assert Ip.clients == inst.clients and not ledger.entries


def test_ledger_extension_adds_exactly_the_ledger(rng):
    inst = random_instance(rng, n=(10, 14), n_fac=(3, 7))
    base = baseline_approx(inst, 0.5)
    Ip, ledger = filter_clients(inst, base, 0.5)
    if not Ip.clients:
        pytest.skip("filter removed every client")
    fac = list(inst.facilities)
    for _ in range(50):
        R = [f for f in fac if rng.random() < 0.5] or [fac[0]]
        sol = evaluate(Ip, R)
        ext = ledger.extend(inst, sol)
        assert ext.total_cost - sol.total_cost == pytest.approx(ledger.total(R))
        assert set(ext.assignment) == set(inst.clients)


def test_ledger_charges_anchor_once():
    L = CreditLedger({1: (7, 0.1, "near"), 2: (7, 0.2, "far")}, {7: 5.0})
    assert L.total() == pytest.approx(5.3)
    assert L.total([7]) == pytest.approx(0.3)
    assert L.to_dict()["clients"][0] == [1, 7, 0.1, "near"]


def test_constants():
    assert aspect_bound_for(0.5) == 16.0
    assert r_for(0.5) == 16.0 * 16
    assert aspect_bound_for(0.1) == 1e6


def test_partition_single_group_when_equal_avgcost():
    pts = [(0, 0), (0.5, 0), (3, 0), (3.5, 0)]
    g = build_udg(pts)
    inst = FLInstance(g, [1, 3], {0: 1.0, 2: 1.0})
    base = baseline_approx(inst, 1.0)
    subs = partition_by_aspect(inst, base, 0.5)
    assert len(subs) == 1 and subs[0].anchors == (0, 2)
    assert subs[0].N == pytest.approx(0.5)


def test_partition_splits_on_large_gap():
    # one cheap tight cluster and one very expensive far one
    pts = [(0, 0), (0.5, 0), (10, 0), (10.9, 0)]
    g = build_udg(pts)
    inst = FLInstance(g, [1, 3], {0: 1.0, 2: 1e6})
    base = baseline_approx(inst, 1.0)
    subs = partition_by_aspect(inst, base, 0.5)
    assert len(subs) == 2
    assert [s.anchors for s in subs] == [(0,), (2,)]


def test_partition_properties(rng):
    for _ in range(15):
        inst = random_instance(rng, n=(10, 16), side=4.0)
        base = baseline_approx(inst, 0.5)
        Ip, _ = filter_clients(inst, base, 0.5)
        subs = partition_by_aspect(Ip, base, 0.5)
        got = sorted(j for s in subs for j in s.inst.clients)
        assert got == list(Ip.clients)
        for s in subs:
            vals = list(s.avgcost.values())
            assert max(vals) <= s.aspect_bound * min(vals) * (1 + 1e-12)
            D = floyd(inst.graph.points)
            for a, cl in s.cluster.items():
                for j in cl:
                    assert s.N - 1e-9 <= D[j, a] <= s.r * s.N + 1e-9
                assert s.avgcost[a] <= s.r * s.N + 1e-9


def test_partition_guard_fires_when_window_split_is_bypassed(monkeypatch):
    import udgfl.reduction as red
    monkeypatch.setattr(red, "_split_groups", lambda anchors, avg, gap, bound: [list(anchors)])
    pts = [(0, 0), (0.5, 0), (2, 0), (2.9, 0), (4, 0), (4.95, 0)]
    g = build_udg(pts)
    inst = FLInstance(g, [1, 3, 5], {0: 0.01, 2: 0.3, 4: 5.0})
    base = baseline_approx(inst, 1.0)
    with pytest.raises(AspectPartitionError, match="aspect partition failed"):
        partition_by_aspect(inst, base, 0.5, aspect_cap=2.0)


def test_merge_single_sub_is_reevaluation(rng):
    inst = random_instance(rng)
    base = baseline_approx(inst, 1.0)
    subs = partition_by_aspect(inst, base, 0.9)
    sols = [(s, evaluate(s.inst, s.anchors)) for s in subs]
    merged = merge_solutions(sols, CreditLedger(), inst)
    opened = sorted({f for _, sol in sols for f in sol.open})
    assert merged.total_cost == pytest.approx(evaluate(inst, opened).total_cost)


def test_merge_dominance_on_pipeline_pieces(rng):
    for _ in range(10):
        inst = random_instance(rng, n=(10, 16), side=3.0)
        base = baseline_approx(inst, 0.5)
        Ip, ledger = filter_clients(inst, base, 0.5)
        subs = partition_by_aspect(Ip, base, 0.5)
        sols = [(s, exact_solve(s.inst)) for s in subs]
        merged = merge_solutions(sols, ledger, inst)
        assert merged.total_cost <= sum(s.total_cost for _, s in sols) + ledger.total() + 1e-9
