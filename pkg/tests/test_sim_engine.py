"""Event kernel, task accounting, mobility stepping, end-to-end determinism."""
import random

import pytest

from fogsim import scenario
from fogsim.sim_engine import (POLICIES, Kernel, Simulation, TaskAccumulator,
                               random_walk_step, run_simulation)

TINY = {
    "horizon_s": 5.0,
    "levels": [
        {"level": 1, "count": 6, "cols": 3, "rows": 2, "cpu_mips": [3000, 4000],
         "capacity": 10, "coverage_m": 300.0},
        {"level": 2, "count": 2, "cols": 2, "rows": 1, "cpu_mips": 8000,
         "capacity": 20, "coverage_m": 600.0},
        {"level": 3, "count": 1, "cols": 1, "rows": 1, "cpu_mips": 10000,
         "capacity": 60, "coverage_m": 0.0},
    ],
    "area": {"width_m": 900.0, "height_m": 600.0},
    "devices": {"count": 6},
}


def tiny_config(**overrides):
    cfg = scenario.load_scenario(overrides=TINY)
    return scenario.load_scenario(overrides={**TINY, **overrides}) if overrides else cfg


# -- kernel ------------------------------------------------------------------

def test_kernel_orders_by_time_then_insertion():
    kernel = Kernel()
    seen = []
    kernel.schedule(1.0, "b", lambda e: seen.append("b"))
    kernel.schedule(0.5, "a", lambda e: seen.append("a"))
    kernel.schedule(1.0, "c", lambda e: seen.append("c"))
    kernel.run(2.0)
    assert seen == ["a", "b", "c"]
    assert kernel.now == 2.0


def test_kernel_rejects_past_events():
    kernel = Kernel()
    kernel.schedule(1.0, "x", lambda e: None)
    kernel.run(1.0)
    with pytest.raises(ValueError):
        kernel.schedule(0.5, "late", lambda e: None)


# -- task accumulator -----------------------------------------------------------

def test_hundred_emissions_per_second_at_10ms_interval():
    acc = TaskAccumulator(0.010)
    acc.start_service(0.0, 0.05, 0.01)
    snap = acc.snapshot(1.0)
    assert snap["emitted"] == 100
    assert snap["emitted"] == snap["completed"] + snap["inflight"] + snap["dropped"]


def test_response_sum_is_count_times_cost_without_windows():
    acc = TaskAccumulator(0.010)
    acc.start_service(0.0, 0.05, 0.02)
    acc.flush(0.5)
    assert acc.emitted == 50
    assert acc.resp_sum == pytest.approx(50 * 0.05)
    assert acc.energy_sum == pytest.approx(50 * 0.02)


def test_delay_mode_charges_remaining_window_time():
    # Downtime 0.100..0.183 s; the emission at 0.143 has 40 ms of window left.
    acc = TaskAccumulator(0.143, mode="delay")
    acc.start_service(0.0, 0.01, 0.0)
    acc.add_window(0.100, 0.183)
    acc.flush(1.0)
    interrupted_extra = 0.183 - 0.143
    base = acc.emitted * 0.01
    assert acc.interrupted == 1
    assert acc.resp_sum == pytest.approx(base + interrupted_extra)


def test_drop_mode_removes_interrupted_tasks():
    acc = TaskAccumulator(0.010, mode="drop")
    acc.start_service(0.0, 0.05, 0.02)
    acc.add_window(0.1, 0.2)  # emissions 0.10 .. 0.19 inclusive: 10 tasks
    snap = acc.snapshot(1.0)
    assert snap["dropped"] == 10
    assert snap["interrupted"] == 10
    assert snap["resp_sum"] == pytest.approx((100 - 10) * 0.05)
    assert snap["emitted"] == snap["completed"] + snap["inflight"] + snap["dropped"]


def test_overlapping_windows_merge():
    acc = TaskAccumulator(0.010)
    acc.start_service(0.0, 0.01, 0.0)
    acc.add_window(0.10, 0.20)
    acc.add_window(0.15, 0.25)
    assert acc.windows == [[0.10, 0.25]]


def test_cost_change_splits_segments():
    acc = TaskAccumulator(0.010)
    acc.start_service(0.0, 0.05, 0.01)
    acc.set_cost(0.5, 0.10, 0.02)
    acc.flush(1.0)
    assert acc.resp_sum == pytest.approx(50 * 0.05 + 50 * 0.10)


# -- mobility -------------------------------------------------------------------

def test_walk_step_kinematics():
    pos, leg, vel = random_walk_step((0.0, 0.0), ((10.0, 0.0), 2.0),
                                     (100.0, 100.0), random.Random(0), 1.0,
                                     (0.5, 4.0), (100.0, 600.0))
    assert pos == pytest.approx((2.0, 0.0))
    assert vel == pytest.approx((2.0, 0.0))
    assert leg == ((10.0, 0.0), 2.0)


def test_walk_new_leg_is_seeded():
    a = random_walk_step((50.0, 50.0), None, (100.0, 100.0), random.Random(9),
                         0.1, (0.5, 4.0), (100.0, 600.0))
    b = random_walk_step((50.0, 50.0), None, (100.0, 100.0), random.Random(9),
                         0.1, (0.5, 4.0), (100.0, 600.0))
    assert a == b


def test_walk_stays_inside_area():
    rng = random.Random(3)
    pos, leg = (5.0, 5.0), None
    for _ in range(2000):
        pos, leg, _ = random_walk_step(pos, leg, (100.0, 80.0), rng, 0.5,
                                       (0.5, 4.0), (100.0, 600.0))
        assert 0.0 <= pos[0] <= 100.0
        assert 0.0 <= pos[1] <= 80.0


def test_arrival_ends_leg():
    pos, leg, _ = random_walk_step((9.0, 0.0), ((10.0, 0.0), 2.0),
                                   (100.0, 100.0), random.Random(0), 1.0,
                                   (0.5, 4.0), (100.0, 600.0))
    assert pos == (10.0, 0.0)
    assert leg is None


# -- end-to-end runs ---------------------------------------------------------------

@pytest.mark.parametrize("policy", POLICIES)
def test_bit_identical_replay(policy):
    cfg = tiny_config(policy=policy, seed=3)
    r1 = run_simulation(cfg)
    r2 = run_simulation(tiny_config(policy=policy, seed=3))
    assert r1.rows == r2.rows
    assert r1.events == r2.events
    assert r1.pdt_mean_s == r2.pdt_mean_s


def test_different_seeds_differ():
    a = run_simulation(tiny_config(policy="proposed", seed=1))
    b = run_simulation(tiny_config(policy="proposed", seed=2))
    assert a.rows != b.rows


def test_zero_horizon_zero_devices_is_empty():
    cfg = tiny_config(devices={"count": 0}, horizon_s=0.0)
    result = run_simulation(cfg, horizons=[0.0])
    assert result.rows == []
    assert result.events == []


def test_every_device_gets_service_and_full_placement():
    cfg = tiny_config(policy="proposed", seed=1)
    sim = Simulation(cfg)
    sim.run([5.0])
    for dev in sim.devices:
        assert dev.pdt_s is not None and dev.pdt_s > 0
        assert dev.service_start is not None
        for module in dev.dag.modules:
            assert module.id in dev.placement.assignment
    for sid, used in sim.ledger.usage_map().items():
        assert 0 <= used <= sim.topology.node(sid).container_capacity


def test_no_failure_events_at_probability_zero():
    cfg = tiny_config(policy="proposed", seed=1,
                      failure={"migration_failure_p": 0.0}, horizon_s=30.0)
    result = run_simulation(cfg)
    assert all(ev["kind"] != "migration_failure" for ev in result.events)


def test_certain_failure_still_completes():
    cfg = tiny_config(policy="proposed", seed=1,
                      failure={"migration_failure_p": 1.0}, horizon_s=30.0)
    result = run_simulation(cfg)
    # Every migration attempt fails, so nothing ever commits a move, yet the
    # run finishes and the metrics stay well-formed.
    assert all(ev["kind"] != "migration" for ev in result.events)
    for row in result.rows:
        assert row["migrations"] == 0
        assert row["emitted"] >= 0


def test_metric_row_shape_and_conservation():
    cfg = tiny_config(policy="maas", seed=2)
    result = run_simulation(cfg, horizons=[2.0, 5.0])
    assert len(result.rows) == 4  # 2 horizons x 2 app templates
    for row in result.rows:
        assert row["emitted"] == row["completed"] + row["inflight"] + row["dropped"]
        assert row["awct"] == pytest.approx(0.5 * row["artt_s"] + 0.5 * row["aect_j"])
        assert row["cmwc"] == pytest.approx(0.5 * row["cmt_s"] + 0.5 * row["cmec_j"])


def test_unknown_policy_rejected():
    cfg = tiny_config()
    cfg["policy"] = "nonsense"
    with pytest.raises(ValueError):
        Simulation(cfg)
