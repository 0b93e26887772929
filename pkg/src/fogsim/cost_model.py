"""Weighted time/energy cost model over the hierarchical topology.

Routing follows the seven next-hop rules: climb while the destination is
higher, descend through a child whose closure holds the destination,
otherwise try a cluster member with such a closure, and climb as a last
resort. Same-level traffic prefers the cluster, falling back upward.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .app_model import AppDag, ScheduleSet
from .topology import RoutingError, ServerId, Topology


@dataclass(frozen=True)
class CostWeights:
    """Relative importance of time (w1) versus energy (w2), each in [0, 1]."""
    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self):
        for name, val in (("w1", self.w1), ("w2", self.w2)):
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {val}")


@dataclass(frozen=True)
class DeviceEnergyProfile:
    """IoT device power draw in watts for compute, idle, and radio transmit."""
    p_cpu_w: float = 0.9
    p_idle_w: float = 0.3
    p_tx_w: float = 1.3


@dataclass(frozen=True)
class MigrationParams:
    """Migration knobs: stop/resume overhead, admissibility slack, dump size draw."""
    i_mig_s: float = 0.05
    epsilon_frac: float = 0.05
    dump_fraction: Tuple[float, float] = (0.05, 0.10)
    notification_timeout_s: float = 1.0


@dataclass
class Placement:
    """Server assignment for one application's modules."""
    app_id: str
    assignment: Dict[str, ServerId] = field(default_factory=dict)

    def copy(self) -> "Placement":
        return Placement(self.app_id, dict(self.assignment))


class ConstraintViolation(ValueError):
    def __init__(self, violations: List[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


# -- next-hop routing ------------------------------------------------------

def _child_toward(topology: Topology, node, dest: ServerId) -> Optional[ServerId]:
    best = None
    for child in node.children:
        if child in topology.nodes and topology.nodes[child].alive \
                and dest in topology.omega(child):
            if best is None or child < best:
                best = child
    return best


def _cluster_toward(topology: Topology, node, dest: ServerId) -> Optional[ServerId]:
    best = None
    for member in node.cluster_members:
        if member in topology.nodes and topology.nodes[member].alive \
                and dest in topology.omega(member):
            if best is None or member < best:
                best = member
    return best


def next_hop(topology: Topology, current: ServerId, dest: ServerId) -> Tuple[str, ServerId]:
    """One routing step; returns (hop kind, next server).

    Kinds: "arrived", "up", "down", "cluster". Upward fallbacks for lateral
    traffic are still charged as up hops.
    """
    if current == dest:
        return ("arrived", current)
    if current not in topology.nodes or dest not in topology.nodes:
        raise RoutingError(f"route endpoints missing: {current} -> {dest}")
    node = topology.nodes[current]
    if not node.alive:
        raise RoutingError(f"routing through dead node {current}")

    def up():
        if node.parent is None or node.parent not in topology.nodes:
            raise RoutingError(f"no route from {current} to {dest}: dead end going up")
        return ("up", node.parent)

    if current.level < dest.level:
        return up()
    if current.level > dest.level:
        child = _child_toward(topology, node, dest)
        if child is not None:
            return ("down", child)
        member = _cluster_toward(topology, node, dest)
        if member is not None:
            return ("cluster", member)
        return up()
    # same level, different index
    member = _cluster_toward(topology, node, dest)
    if member is not None:
        return ("cluster", member)
    return up()


def route(topology: Topology, src: ServerId, dest: ServerId) -> List[Tuple[str, ServerId, ServerId]]:
    """Full hop list [(kind, frm, to), ...]; empty when src == dest."""
    hops = []
    cur = src
    limit = 4 * (topology.max_fog_level + 2) + len(topology.nodes)
    while cur != dest:
        kind, nxt = next_hop(topology, cur, dest)
        hops.append((kind, cur, nxt))
        cur = nxt
        if len(hops) > limit:
            raise RoutingError(f"route {src} -> {dest} did not converge")
    return hops


def _hop_level(kind: str, frm: ServerId, to: ServerId) -> int:
    if kind == "up":
        return frm.level
    if kind == "down":
        return to.level
    return frm.level  # cluster


def _cached_route(topology: Topology, src: ServerId, dest: ServerId):
    cache = getattr(topology, "_route_cache", None)
    if cache is None or getattr(topology, "_route_cache_rev", -1) != topology.revision:
        cache = {}
        topology._route_cache = cache
        topology._route_cache_rev = topology.revision
    key = (src, dest)
    hops = cache.get(key)
    if hops is None:
        hops = route(topology, src, dest)
        cache[key] = hops
    return hops


def transmission_time(topology: Topology, payload_bits: float,
                      src: ServerId, dest: ServerId) -> float:
    """Sum of payload/bandwidth over every hop of the route; zero when src == dest."""
    total = 0.0
    links = topology.links
    for kind, frm, to in _cached_route(topology, src, dest):
        lvl = _hop_level(kind, frm, to)
        if kind == "down":
            bw = links.bw_down[lvl]
        elif kind == "cluster":
            bw = links.bw_cluster[lvl]
        else:
            bw = links.bw_up[lvl]
        total += payload_bits / bw
    return total


def internodal_latency(topology: Topology, src: ServerId, dest: ServerId) -> float:
    """Sum of per-hop latency constants over the route; zero when src == dest."""
    total = 0.0
    links = topology.links
    for kind, frm, to in _cached_route(topology, src, dest):
        lvl = _hop_level(kind, frm, to)
        if kind == "down":
            total += links.lat_down[lvl]
        elif kind == "cluster":
            total += links.lat_cluster[lvl]
        else:
            total += links.lat_up[lvl]
    return total


# -- energy ----------------------------------------------------------------

def transmission_energy(topology: Topology, profile: DeviceEnergyProfile,
                        payload_bits: float, src: ServerId, dest: ServerId) -> float:
    """Device-centric transmission energy.

    The device radio (p_tx) is charged only on the device-facing hop: the
    first hop when the source is a device, the last hop when the destination
    is one. Every remaining second of transfer is billed at idle power.
    """
    if src == dest:
        return 0.0
    hops = _cached_route(topology, src, dest)
    links = topology.links
    energy = 0.0
    for pos, (kind, frm, to) in enumerate(hops):
        lvl = _hop_level(kind, frm, to)
        if kind == "down":
            bw = links.bw_down[lvl]
        elif kind == "cluster":
            bw = links.bw_cluster[lvl]
        else:
            bw = links.bw_up[lvl]
        seconds = payload_bits / bw
        device_hop = (pos == 0 and src.level == 0) or (pos == len(hops) - 1 and dest.level == 0)
        energy += seconds * (profile.p_tx_w if device_hop else profile.p_idle_w)
    return energy


def internodal_energy(topology: Topology, profile: DeviceEnergyProfile,
                      src: ServerId, dest: ServerId) -> float:
    """Latency seconds billed at device idle power."""
    return internodal_latency(topology, src, dest) * profile.p_idle_w


# -- module and application cost -------------------------------------------

def module_time(topology: Topology, dag: AppDag, placement: Placement,
                module_id: str) -> float:
    """Execution plus worst incoming latency plus worst incoming transfer time."""
    server = placement.assignment[module_id]
    node = topology.node(server)
    t_exe = 0.0
    t_lat = 0.0
    t_tra = 0.0
    for flow in dag.preds[module_id]:
        src = placement.assignment[flow.src]
        t_exe += flow.instructions_mi / node.cpu_mips
        t_lat = max(t_lat, internodal_latency(topology, src, server))
        t_tra = max(t_tra, transmission_time(topology, flow.payload_bits, src, server))
    return t_exe + t_lat + t_tra


def module_energy(topology: Topology, dag: AppDag, placement: Placement,
                  profile: DeviceEnergyProfile, module_id: str) -> float:
    """Device-centric energy: execution (or idle wait), latency idle, transfer."""
    server = placement.assignment[module_id]
    node = topology.node(server)
    e_exe = 0.0
    e_lat = 0.0
    e_tra = 0.0
    for flow in dag.preds[module_id]:
        src = placement.assignment[flow.src]
        t_exe = flow.instructions_mi / node.cpu_mips
        # On the device the CPU burns p_cpu; offloaded work leaves the device
        # idling for exactly the remote execution time.
        e_exe += t_exe * (profile.p_cpu_w if server.level == 0 else profile.p_idle_w)
        e_lat = max(e_lat, internodal_energy(topology, profile, src, server))
        e_tra = max(e_tra, transmission_energy(topology, profile, flow.payload_bits, src, server))
    return e_exe + e_lat + e_tra


def schedule_cost(topology: Topology, dag: AppDag, placement: Placement,
                  profile: DeviceEnergyProfile, modules: List[str]) -> Tuple[float, float]:
    """(time, energy) of one schedule: the max over its modules (they run in parallel)."""
    t = 0.0
    e = 0.0
    for mid in modules:
        t = max(t, module_time(topology, dag, placement, mid))
        e = max(e, module_energy(topology, dag, placement, profile, mid))
    return t, e


def validate_placement(topology: Topology, dag: AppDag, placement: Placement,
                       schedule_set: ScheduleSet,
                       capacity_used: Optional[Dict[ServerId, int]] = None) -> List[str]:
    """Check the three placement constraints; returns a list of violations.

    C1: every module sits on exactly one known server.
    C2: no server holds more containers than its capacity (optionally against
        a global usage map, otherwise against this placement alone).
    C3: every module is scheduled after all of its predecessors.
    """
    violations = []
    counts: Dict[ServerId, int] = dict(capacity_used) if capacity_used else {}
    for module in dag.modules:
        sid = placement.assignment.get(module.id)
        if sid is None or sid not in topology.nodes:
            violations.append(f"C1: module {module.id} has no valid server")
            continue
        if capacity_used is None and not module.pinned_to_device:
            counts[sid] = counts.get(sid, 0) + 1
    for sid, used in counts.items():
        cap = topology.node(sid).container_capacity
        if used > cap:
            violations.append(f"C2: server {sid} holds {used} containers, capacity {cap}")
    for flow in dag.flows:
        if schedule_set.order_of[flow.src] >= schedule_set.order_of[flow.dst]:
            violations.append(f"C3: {flow.dst} not scheduled after predecessor {flow.src}")
    return violations


def app_cost_breakdown(topology: Topology, dag: AppDag, placement: Placement,
                       schedule_set: ScheduleSet, profile: DeviceEnergyProfile
                       ) -> Tuple[float, float]:
    """(total time, total energy) summed over all schedules."""
    total_t = 0.0
    total_e = 0.0
    for modules in schedule_set.schedules:
        t, e = schedule_cost(topology, dag, placement, profile, modules)
        total_t += t
        total_e += e
    return total_t, total_e


def app_cost(topology: Topology, dag: AppDag, placement: Placement,
             schedule_set: ScheduleSet, weights: CostWeights,
             profile: DeviceEnergyProfile, validate: bool = False,
             capacity_used: Optional[Dict[ServerId, int]] = None) -> float:
    """Weighted application cost: w1 * total time + w2 * total energy."""
    if validate:
        violations = validate_placement(topology, dag, placement, schedule_set, capacity_used)
        if violations:
            raise ConstraintViolation(violations)
    t, e = app_cost_breakdown(topology, dag, placement, schedule_set, profile)
    return weights.w1 * t + weights.w2 * e


# -- migration -------------------------------------------------------------

@dataclass(frozen=True)
class MigrationCost:
    time_s: float
    energy_j: float
    weighted: float


def module_migration_cost(topology: Topology, profile: DeviceEnergyProfile,
                          params: MigrationParams, weights: CostWeights,
                          dump_bits: float, frm: ServerId, to: ServerId,
                          remaining_mi: float) -> MigrationCost:
    """Cost of moving one container from `frm` to `to`.

    Time: route latency + stop/resume overhead + dump transfer + catching up
    the interrupted execution on the new server. Moving in place still pays
    the stop/resume overhead and the execution remainder.
    """
    node_to = topology.node(to)
    t_exe = remaining_mi / node_to.cpu_mips
    if frm == to:
        t_lat = 0.0
        t_tra = 0.0
        e_lat = 0.0
        e_tra = 0.0
    else:
        t_lat = internodal_latency(topology, frm, to)
        t_tra = transmission_time(topology, dump_bits, frm, to)
        e_lat = internodal_energy(topology, profile, frm, to)
        e_tra = transmission_energy(topology, profile, dump_bits, frm, to)
    time_s = t_lat + params.i_mig_s + t_tra + t_exe
    e_exe = t_exe * (profile.p_cpu_w if to.level == 0 else profile.p_idle_w)
    energy_j = e_lat + e_tra + e_exe
    return MigrationCost(time_s=time_s, energy_j=energy_j,
                         weighted=weights.w1 * time_s + weights.w2 * energy_j)


def migration_admissible(old_app_cost: float, new_app_cost: float, epsilon: float) -> bool:
    """A migration is allowed when the new cost stays within epsilon of the old."""
    return new_app_cost <= old_app_cost + epsilon
