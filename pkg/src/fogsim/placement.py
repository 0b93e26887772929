"""Distributed application placement: per-controller greedy over ready servers.

A controller places each unpinned module, schedule by schedule in rank order,
on the cheapest capacity-holding member of its ready-server list (itself, its
cluster members, its parent). Modules that fit nowhere escalate to the parent,
which repeats the same procedure one level up.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import cost_model
from .app_model import AppDag, ScheduleSet
from .cost_model import CostWeights, DeviceEnergyProfile, Placement
from .topology import ServerId, Topology


class PlacementError(RuntimeError):
    """Raised when a module cannot be placed anywhere, cloud included."""


class CapacityLedger:
    """Authoritative container bookkeeping across all servers.

    Tracks slot usage against capacity and which (template, module) container
    types are already active per server, so repeat placements can scale a
    warm container instead of paying the cold startup.
    """

    def __init__(self, topology: Topology):
        self.topology = topology
        self.used: Dict[ServerId, int] = {}
        self.active_types: Dict[Tuple[ServerId, str, str], int] = {}

    def free(self, sid: ServerId) -> int:
        return self.topology.node(sid).container_capacity - self.used.get(sid, 0)

    def is_warm(self, sid: ServerId, template: str, module_id: str) -> bool:
        return self.active_types.get((sid, template, module_id), 0) > 0

    def reserve(self, sid: ServerId, template: str, module_id: str) -> bool:
        if self.free(sid) <= 0:
            return False
        self.used[sid] = self.used.get(sid, 0) + 1
        key = (sid, template, module_id)
        self.active_types[key] = self.active_types.get(key, 0) + 1
        self.topology.node(sid).active_containers = self.used[sid]
        return True

    def release(self, sid: ServerId, template: str, module_id: str):
        self.used[sid] = self.used.get(sid, 0) - 1
        key = (sid, template, module_id)
        self.active_types[key] = self.active_types.get(key, 0) - 1
        if self.active_types[key] <= 0:
            del self.active_types[key]
        self.topology.node(sid).active_containers = self.used[sid]

    def usage_map(self) -> Dict[ServerId, int]:
        return dict(self.used)


@dataclass
class PlacementDecision:
    module: str
    server: ServerId
    warm: bool
    remote: bool


@dataclass
class PlacementPlan:
    controller: ServerId
    decisions: List[PlacementDecision] = field(default_factory=list)
    escalated: List[str] = field(default_factory=list)

    def by_server(self) -> Dict[ServerId, List[PlacementDecision]]:
        grouped: Dict[ServerId, List[PlacementDecision]] = {}
        for dec in self.decisions:
            grouped.setdefault(dec.server, []).append(dec)
        return grouped


def ready_servers(topology: Topology, controller: ServerId) -> List[ServerId]:
    """Controller itself, its alive cluster members (sorted), then its parent."""
    node = topology.node(controller)
    out = [controller]
    out.extend(sorted(m for m in node.cluster_members
                      if m in topology.nodes and topology.nodes[m].alive))
    if node.parent is not None and topology.nodes[node.parent].alive:
        out.append(node.parent)
    return out


def marginal_cost(topology: Topology, dag: AppDag, placement: Placement,
                  module_id: str, candidate: ServerId, weights: CostWeights,
                  profile: DeviceEnergyProfile) -> float:
    """Weighted cost the module adds when run on the candidate, predecessors fixed."""
    trial = placement.assignment.get(module_id)
    placement.assignment[module_id] = candidate
    try:
        t = cost_model.module_time(topology, dag, placement, module_id)
        e = cost_model.module_energy(topology, dag, placement, profile, module_id)
    finally:
        if trial is None:
            del placement.assignment[module_id]
        else:
            placement.assignment[module_id] = trial
    return weights.w1 * t + weights.w2 * e


def find_min_cost(topology: Topology, ledger: CapacityLedger,
                  candidates: Sequence[ServerId], dag: AppDag, placement: Placement,
                  module_id: str, weights: CostWeights, profile: DeviceEnergyProfile,
                  pending: Optional[Dict[ServerId, int]] = None,
                  parent: Optional[ServerId] = None) -> Optional[ServerId]:
    """Cheapest capacity-holding candidate for the module, or None.

    Ties go to non-parent candidates first, then lower level, then lower index.
    """
    pending = pending or {}
    best = None
    best_key = None
    for cand in candidates:
        if ledger.free(cand) - pending.get(cand, 0) <= 0:
            continue
        cost = marginal_cost(topology, dag, placement, module_id, cand, weights, profile)
        key = (cost, cand == parent, cand.level, cand.index)
        if best_key is None or key < best_key:
            best_key = key
            best = cand
    return best


def dapt_place(topology: Topology, ledger: CapacityLedger, controller: ServerId,
               dag: AppDag, placement: Placement, schedule_set: ScheduleSet,
               ranked: Dict[int, List[str]], todo: Sequence[str],
               weights: CostWeights, profile: DeviceEnergyProfile) -> PlacementPlan:
    """Place the given modules from this controller; mutates `placement`.

    Local decisions reserve capacity immediately; remote decisions are
    tentative (confirmed by handle_remote_placement). Modules that fit
    nowhere in the ready-server list are escalated, together with everything
    not yet decided, so the parent sees a consistent prefix.
    """
    plan = PlacementPlan(controller=controller)
    node = topology.node(controller)
    parent = node.parent if node.parent is not None and topology.nodes[node.parent].alive else None
    candidates = ready_servers(topology, controller)
    todo_set = set(todo)
    pending: Dict[ServerId, int] = {}

    ordered = []
    for pos in sorted(ranked):
        ordered.extend(m for m in ranked[pos] if m in todo_set)
    leftover = sorted(m for m in todo_set if m not in set(ordered))
    ordered.extend(leftover)

    for idx, module_id in enumerate(ordered):
        choice = find_min_cost(topology, ledger, candidates, dag, placement,
                               module_id, weights, profile, pending, parent)
        if choice is None:
            if parent is None:
                raise PlacementError(
                    f"no capacity anywhere for module {module_id} at {controller}")
            plan.escalated.extend(ordered[idx:])
            break
        placement.assignment[module_id] = choice
        warm = ledger.is_warm(choice, dag.template, module_id)
        if choice == controller:
            ledger.reserve(choice, dag.template, module_id)
            plan.decisions.append(PlacementDecision(module_id, choice, warm, remote=False))
        else:
            pending[choice] = pending.get(choice, 0) + 1
            plan.decisions.append(PlacementDecision(module_id, choice, warm, remote=True))
    return plan


def handle_remote_placement(topology: Topology, ledger: CapacityLedger,
                            server: ServerId, dag: AppDag,
                            modules: Sequence[str],
                            force_fail: bool = False) -> List[Tuple[str, bool, bool]]:
    """Confirm forwarded modules at the target server.

    Returns (module, accepted, warm) per module. A rejected module keeps no
    reservation; the caller runs failure recovery for it.
    """
    results = []
    for module_id in modules:
        if force_fail or not topology.node(server).alive:
            results.append((module_id, False, False))
            continue
        warm = ledger.is_warm(server, dag.template, module_id)
        ok = ledger.reserve(server, dag.template, module_id)
        results.append((module_id, ok, warm))
    return results


def dapt_failure_recovery(topology: Topology, ledger: CapacityLedger,
                          controller: ServerId, failed: ServerId, dag: AppDag,
                          placement: Placement, schedule_set: ScheduleSet,
                          ranked: Dict[int, List[str]], modules: Sequence[str],
                          weights: CostWeights, profile: DeviceEnergyProfile) -> PlacementPlan:
    """Re-home modules whose target failed, excluding that target.

    Falls back to escalation when the surviving ready servers are exhausted.
    """
    node = topology.node(controller)
    parent = node.parent if node.parent is not None and topology.nodes[node.parent].alive else None
    candidates = [c for c in ready_servers(topology, controller) if c != failed]
    plan = PlacementPlan(controller=controller)
    pending: Dict[ServerId, int] = {}
    remaining = list(modules)
    for idx, module_id in enumerate(remaining):
        choice = find_min_cost(topology, ledger, candidates, dag, placement,
                               module_id, weights, profile, pending, parent)
        if choice is None:
            if parent is None:
                raise PlacementError(
                    f"failure recovery exhausted all servers for {module_id}")
            plan.escalated.extend(remaining[idx:])
            break
        placement.assignment[module_id] = choice
        warm = ledger.is_warm(choice, dag.template, module_id)
        if choice == controller:
            ledger.reserve(choice, dag.template, module_id)
            plan.decisions.append(PlacementDecision(module_id, choice, warm, remote=False))
        else:
            pending[choice] = pending.get(choice, 0) + 1
            plan.decisions.append(PlacementDecision(module_id, choice, warm, remote=True))
    return plan
