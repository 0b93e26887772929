"""Mobility-driven migration management.

When a device is about to leave its serving coverage, the old controller
picks a new controller (mobility-aware: longest expected sojourn among
cluster-reachable candidates), and the new controller coordinates moving the
device's containers layer by layer, schedule by schedule, keeping every move
within the admissibility slack of the current application cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import cost_model
from .app_model import AppDag, ScheduleSet
from .cost_model import (CostWeights, DeviceEnergyProfile, MigrationCost,
                         MigrationParams, Placement)
from .placement import CapacityLedger
from .topology import ServerId, Topology


def estimate_sojourn(position: Tuple[float, float], velocity: Tuple[float, float],
                     center: Tuple[float, float], radius: float) -> float:
    """Seconds a straight-line mover spends inside a coverage circle from now on.

    Zero when the path never crosses the circle ahead of the mover, or when
    the mover is stationary.
    """
    dx = position[0] - center[0]
    dy = position[1] - center[1]
    a = velocity[0] ** 2 + velocity[1] ** 2
    if a == 0.0:
        return 0.0
    b = 2.0 * (dx * velocity[0] + dy * velocity[1])
    c = dx * dx + dy * dy - radius * radius
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return 0.0
    root = math.sqrt(disc)
    t1 = (-b - root) / (2.0 * a)
    t2 = (-b + root) / (2.0 * a)
    if t2 <= 0.0:
        return 0.0
    return t2 - max(t1, 0.0)


def departure_imminent(node_position: Tuple[float, float], radius: float,
                       device_position: Tuple[float, float],
                       velocity: Tuple[float, float], margin: float = 0.05) -> bool:
    """True when the device sits in the outer margin of the coverage circle
    and is heading outward, or has already left it."""
    dx = device_position[0] - node_position[0]
    dy = device_position[1] - node_position[1]
    dist = math.hypot(dx, dy)
    if dist > radius:
        return True
    if dist < (1.0 - margin) * radius:
        return False
    return dx * velocity[0] + dy * velocity[1] > 0.0


def cluster_reachable(topology: Topology, controller: ServerId) -> set:
    """Servers reachable laterally: cluster members and members-of-members."""
    members = set(topology.node(controller).cluster_members)
    second = set()
    for m in members:
        if m in topology.nodes:
            second.update(topology.nodes[m].cluster_members)
    second.discard(controller)
    return members | second


def analyze_mobility(topology: Topology, controller: ServerId,
                     device_position: Tuple[float, float],
                     velocity: Tuple[float, float], sensed: Sequence[ServerId],
                     required_slots: int, ledger: CapacityLedger,
                     rng) -> Optional[ServerId]:
    """Choose the next controller for a departing device.

    Preference order: cluster-reachable candidate with the longest sojourn
    and enough free slots; then longest-sojourn reachable regardless of
    slots; then a seeded-random unreachable candidate.
    """
    candidates = [s for s in sensed if s != controller]
    if not candidates:
        return None
    reachable_set = cluster_reachable(topology, controller)
    reach = [s for s in candidates if s in reachable_set]
    unreach = [s for s in candidates if s not in reachable_set]

    def sojourn(sid: ServerId) -> float:
        node = topology.node(sid)
        return estimate_sojourn(device_position, velocity, node.position,
                                node.coverage_radius)

    with_slots = [s for s in reach if ledger.free(s) >= required_slots]
    pool = with_slots or reach
    if pool:
        return max(pool, key=lambda s: (sojourn(s), -s.index))
    return rng.choice(sorted(unreach))


def remaining_instructions(total_mi: float, cpu_mips: float, interval_s: float,
                           pipeline_offset_s: float, at_time_s: float,
                           service_start_s: float) -> float:
    """Unexecuted instructions of the task in flight at suspension time.

    The module starts each task at emission + pipeline offset and runs for
    total/cpu seconds; outside that execution window the container is idle
    and there is nothing to catch up.
    """
    if total_mi <= 0 or at_time_s < service_start_s:
        return 0.0
    t_exe = total_mi / cpu_mips
    rel = at_time_s - service_start_s - pipeline_offset_s
    if rel < 0:
        return 0.0
    phase = rel % interval_s
    if phase < t_exe:
        return total_mi * (1.0 - phase / t_exe)
    return 0.0


@dataclass
class MigrationDecision:
    module: str
    frm: ServerId
    to: Optional[ServerId]
    cost: Optional[MigrationCost]
    escalate: bool = False


@dataclass
class MigrationRound:
    """All per-layer decisions of one schedule position."""
    schedule_pos: int
    by_decider: Dict[ServerId, List[str]] = field(default_factory=dict)


def plan_rounds(topology: Topology, new_controller: ServerId, dag: AppDag,
                placement: Placement, schedule_set: ScheduleSet,
                central: Optional[ServerId] = None,
                exclude: Sequence[str] = ()) -> List[MigrationRound]:
    """Group movable modules per schedule, assigning each to its decider.

    Modules previously served at layer L are decided by the new controller's
    ancestor at layer L (the controller itself for layer 1). With a central
    decider set, everything funnels there instead.
    """
    rounds = []
    skip = set(exclude)
    for pos, group in enumerate(schedule_set.schedules, start=1):
        rnd = MigrationRound(schedule_pos=pos)
        movable = [m for m in group
                   if not dag.module_map[m].pinned_to_device and m not in skip]
        movable.sort(key=lambda m: (-dag.module_map[m].container_ram_mb, m))
        for mid in movable:
            prev = placement.assignment[mid]
            if central is not None:
                decider = central
            else:
                decider = topology.ancestor_at_level(new_controller, prev.level)
                if decider is None:
                    decider = topology.cloud_id if prev.level > topology.max_fog_level \
                        else new_controller
            rnd.by_decider.setdefault(decider, []).append(mid)
        if rnd.by_decider:
            rounds.append(rnd)
    return rounds


def migration_candidates(topology: Topology, decider: ServerId,
                         use_cluster: bool = True) -> List[ServerId]:
    """Ready servers for migration decisions: cluster members, self, children."""
    node = topology.node(decider)
    out = []
    if use_cluster:
        out.extend(sorted(m for m in node.cluster_members
                          if m in topology.nodes and topology.nodes[m].alive))
    out.append(decider)
    out.extend(sorted(c for c in node.children
                      if c in topology.nodes and topology.nodes[c].alive and c.level >= 1))
    return out


def handle_migration_req(topology: Topology, ledger: CapacityLedger,
                         decider: ServerId, dag: AppDag, working: Placement,
                         schedule_set: ScheduleSet, modules: Sequence[str],
                         weights: CostWeights, profile: DeviceEnergyProfile,
                         params: MigrationParams,
                         dump_bits_of, remaining_mi_of,
                         use_cluster: bool = True,
                         candidates: Optional[Sequence[ServerId]] = None,
                         exclude: Sequence[ServerId] = (),
                         check_admissibility: bool = True) -> List[MigrationDecision]:
    """Decide destinations for the given modules at one decider.

    Candidates are scored by migration cost ascending; the cheapest one whose
    resulting application cost stays admissible wins. Staying put is a valid
    outcome when the old server is among the candidates. Modules with no
    admissible capacity-holding candidate are marked for escalation. With the
    admissibility check off, the cheapest capacity-holding candidate is
    committed outright.
    """
    if candidates is None:
        candidates = migration_candidates(topology, decider, use_cluster)
    candidates = [c for c in candidates if c not in set(exclude)]
    decisions = []
    for module_id in modules:
        frm = working.assignment[module_id]
        old_cost = cost_model.app_cost(topology, dag, working, schedule_set,
                                       weights, profile)
        epsilon = params.epsilon_frac * old_cost
        dump_bits = dump_bits_of(module_id)
        remaining = remaining_mi_of(module_id)
        scored = []
        for cand in candidates:
            if cand != frm and ledger.free(cand) <= 0:
                continue
            mc = cost_model.module_migration_cost(
                topology, profile, params, weights, dump_bits, frm, cand, remaining)
            scored.append((mc.weighted, cand.level, cand.index, cand, mc))
        scored.sort(key=lambda item: item[:3])
        chosen = None
        for _, _, _, cand, mc in scored:
            if not check_admissibility:
                chosen = (cand, mc)
                break
            working.assignment[module_id] = cand
            new_cost = cost_model.app_cost(topology, dag, working, schedule_set,
                                           weights, profile)
            working.assignment[module_id] = frm
            if cost_model.migration_admissible(old_cost, new_cost, epsilon):
                chosen = (cand, mc)
                break
        if chosen is None:
            decisions.append(MigrationDecision(module_id, frm, None, None, escalate=True))
            continue
        cand, mc = chosen
        working.assignment[module_id] = cand
        decisions.append(MigrationDecision(module_id, frm, cand, mc))
    return decisions


def mmt_failure_recovery(topology: Topology, ledger: CapacityLedger,
                         decider: ServerId, dag: AppDag, working: Placement,
                         schedule_set: ScheduleSet, module_id: str,
                         failed: ServerId, weights: CostWeights,
                         profile: DeviceEnergyProfile, params: MigrationParams,
                         dump_bits_of, remaining_mi_of,
                         use_cluster: bool = True,
                         exclude: Sequence[ServerId] = (),
                         check_admissibility: bool = True) -> List[MigrationDecision]:
    """Re-decide one module after its migration target failed.

    Same scoring as the original decision with the failed server removed;
    the caller escalates to the decider's parent when this also fails. The
    working placement must hold the module at its old server on entry.
    """
    return handle_migration_req(
        topology, ledger, decider, dag, working, schedule_set, [module_id],
        weights, profile, params, dump_bits_of, remaining_mi_of,
        use_cluster=use_cluster, exclude=list(exclude) + [failed],
        check_admissibility=check_admissibility)
