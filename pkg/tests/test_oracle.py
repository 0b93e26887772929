"""Exact placement optimum: branch and bound versus exhaustive enumeration."""
import random

import pytest

from fogsim import cost_model, oracle
from fogsim.app_model import AppDag, DataFlow, Module, build_schedules
from fogsim.cost_model import CostWeights, DeviceEnergyProfile, Placement

from conftest import S, make_small_topology

WEIGHTS = CostWeights()
PROFILE = DeviceEnergyProfile()


def pinned_base(dag, device=S(0, 5)):
    base = Placement(dag.app_id)
    for m in dag.modules:
        if m.pinned_to_device:
            base.assignment[m.id] = device
    return base


def single_module_dag():
    return AppDag("t", "t",
                  [Module("s", pinned_to_device=True), Module("m")],
                  [DataFlow("s", "m", 700.0, 1e6)], 0.01)


def test_single_module_is_argmin_over_candidates():
    topo = make_small_topology(with_device=True)
    dag = single_module_dag()
    sched = build_schedules(dag)
    candidates = [S(1, 1), S(1, 2), S(2, 1)]
    costs = {}
    for sid in candidates:
        plc = pinned_base(dag)
        plc.assignment["m"] = sid
        costs[sid] = cost_model.app_cost(topo, dag, plc, sched, WEIGHTS, PROFILE)
    res = oracle.optimal_placement(topo, dag, WEIGHTS, PROFILE, candidates,
                                   base_placement=pinned_base(dag))
    best = min(candidates, key=lambda sid: (costs[sid], sid))
    assert res.placement.assignment["m"] == best
    assert res.cost == pytest.approx(costs[best])
    assert res.complete


def random_dag(rng):
    n = rng.randint(2, 3)
    modules = [Module("s", pinned_to_device=True)] + \
        [Module(f"m{i}") for i in range(1, n + 1)]
    flows = [DataFlow("s", "m1", rng.uniform(100, 1500), rng.uniform(1e3, 1e7))]
    for i in range(2, n + 1):
        src = f"m{rng.randint(1, i - 1)}"
        flows.append(DataFlow(src, f"m{i}", rng.uniform(100, 1500),
                              rng.uniform(1e3, 1e7)))
    return AppDag("r", "r", modules, flows, 0.01)


def test_branch_and_bound_matches_exhaustive_enumeration():
    rng = random.Random(2024)
    pool = [S(1, 1), S(1, 2), S(1, 3), S(2, 1), S(3, 1)]
    for trial in range(30):
        topo = make_small_topology(with_device=True)
        if rng.random() < 0.5:
            topo.link_cluster(S(1, 1), S(1, 2))
        dag = random_dag(rng)
        candidates = rng.sample(pool, rng.randint(2, 4))
        free = None
        if rng.random() < 0.5:
            free = {sid: rng.randint(1, 2) for sid in candidates}
            if sum(free.values()) < len(dag.unpinned()):
                free[candidates[0]] += len(dag.unpinned())
        base = pinned_base(dag)
        bb = oracle.optimal_placement(topo, dag, WEIGHTS, PROFILE, candidates,
                                      capacity_free=free, base_placement=base)
        ex = oracle.exhaustive_optimal(topo, dag, WEIGHTS, PROFILE, candidates,
                                       capacity_free=free, base_placement=base)
        assert bb.complete
        assert bb.cost == pytest.approx(ex.cost, rel=1e-12)
        assert bb.placement.assignment == ex.placement.assignment


def test_capacity_limits_are_respected():
    topo = make_small_topology(with_device=True)
    dag = random_dag(random.Random(7))
    candidates = [S(1, 1), S(1, 2)]
    free = {S(1, 1): 1, S(1, 2): 5}
    res = oracle.optimal_placement(topo, dag, WEIGHTS, PROFILE, candidates,
                                   capacity_free=free,
                                   base_placement=pinned_base(dag))
    used = {}
    for mid in dag.unpinned():
        sid = res.placement.assignment[mid]
        used[sid] = used.get(sid, 0) + 1
    assert used.get(S(1, 1), 0) <= 1


def test_budget_exhaustion_reports_incomplete():
    topo = make_small_topology(with_device=True)
    dag = random_dag(random.Random(3))
    res = oracle.optimal_placement(topo, dag, WEIGHTS, PROFILE,
                                   [S(1, 1), S(1, 2), S(2, 1)],
                                   base_placement=pinned_base(dag),
                                   node_budget=1)
    assert not res.complete


def test_infeasible_capacity_returns_infinite_cost():
    topo = make_small_topology(with_device=True)
    dag = single_module_dag()
    res = oracle.optimal_placement(topo, dag, WEIGHTS, PROFILE, [S(1, 1)],
                                   capacity_free={S(1, 1): 0},
                                   base_placement=pinned_base(dag))
    assert res.placement is None
    assert res.cost == float("inf")


def test_pinned_module_without_preset_server_rejected():
    topo = make_small_topology(with_device=True)
    dag = single_module_dag()
    with pytest.raises(ValueError):
        oracle.optimal_placement(topo, dag, WEIGHTS, PROFILE, [S(1, 1)])
