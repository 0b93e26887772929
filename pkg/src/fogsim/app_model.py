"""Application DAGs, topological schedule sets, and weighted upward ranks."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .topology import ServerId, Topology


class CycleError(ValueError):
    """Raised when the module graph is not a DAG."""


@dataclass(frozen=True)
class DataFlow:
    """Directed dependency between two modules.

    instructions_mi is the work (million instructions) the destination runs
    on this flow's input; payload_bits is the data shipped along the edge.
    """
    src: str
    dst: str
    instructions_mi: float
    payload_bits: float


@dataclass
class Module:
    id: str
    pinned_to_device: bool = False
    container_ram_mb: float = 64.0
    max_tolerable_delay_s: Optional[float] = None


@dataclass
class AppDag:
    """One application instance: modules plus data flows, emitting every sensor_interval_s."""
    app_id: str
    template: str
    modules: List[Module]
    flows: List[DataFlow]
    sensor_interval_s: float
    preds: Dict[str, List[DataFlow]] = field(default_factory=dict, repr=False)
    succs: Dict[str, List[DataFlow]] = field(default_factory=dict, repr=False)
    module_map: Dict[str, Module] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.module_map = {m.id: m for m in self.modules}
        self.preds = {m.id: [] for m in self.modules}
        self.succs = {m.id: [] for m in self.modules}
        for flow in self.flows:
            if flow.src not in self.module_map or flow.dst not in self.module_map:
                raise ValueError(f"flow {flow.src}->{flow.dst} references unknown module")
            self.preds[flow.dst].append(flow)
            self.succs[flow.src].append(flow)

    def unpinned(self) -> List[str]:
        return [m.id for m in self.modules if not m.pinned_to_device]

    def incoming_mi(self, module_id: str) -> float:
        return sum(f.instructions_mi for f in self.preds[module_id])


@dataclass
class ScheduleSet:
    """Modules grouped by topological order value, lowest first."""
    schedules: List[List[str]]
    order_of: Dict[str, int]

    def __iter__(self):
        return iter(self.schedules)


def build_schedules(dag: AppDag) -> ScheduleSet:
    """BFS topological grouping: a module's order is 1 + max order of its predecessors."""
    indeg = {m.id: len(dag.preds[m.id]) for m in dag.modules}
    order = {m.id: 1 for m in dag.modules}
    queue = deque(sorted(mid for mid, d in indeg.items() if d == 0))
    seen = 0
    while queue:
        cur = queue.popleft()
        seen += 1
        for flow in dag.succs[cur]:
            order[flow.dst] = max(order[flow.dst], order[cur] + 1)
            indeg[flow.dst] -= 1
            if indeg[flow.dst] == 0:
                queue.append(flow.dst)
    if seen != len(dag.modules):
        raise CycleError(f"module graph of {dag.app_id} contains a cycle")
    by_order: Dict[int, List[str]] = {}
    for mid, val in order.items():
        by_order.setdefault(val, []).append(mid)
    schedules = [sorted(by_order[val]) for val in sorted(by_order)]
    return ScheduleSet(schedules=schedules, order_of=order)


def compute_rank(dag: AppDag, ready_servers: Sequence[ServerId], weights,
                 topology: Topology, profile) -> Dict[str, float]:
    """Weighted upward rank of every module over the candidate server set.

    Execution term averages the weighted run cost across candidates;
    the transfer term averages pairwise transfer cost over all ordered
    candidate pairs, counting same-server pairs as zero.
    """
    from . import cost_model  # local import: cost_model depends on topology only

    servers = list(ready_servers)
    if not servers:
        raise ValueError("rank needs at least one candidate server")
    n = len(servers)

    def exec_cost(module_id: str) -> float:
        total = 0.0
        for sid in servers:
            node = topology.node(sid)
            t_exe = dag.incoming_mi(module_id) / node.cpu_mips
            p = profile.p_cpu_w if sid.level == 0 else profile.p_idle_w
            total += weights.w1 * t_exe + weights.w2 * t_exe * p
        return total / n

    def transfer_cost(flow: DataFlow) -> float:
        total = 0.0
        for a in servers:
            for b in servers:
                if a == b:
                    continue
                t = cost_model.transmission_time(topology, flow.payload_bits, a, b)
                e = cost_model.transmission_energy(topology, profile, flow.payload_bits, a, b)
                total += weights.w1 * t + weights.w2 * e
        return total / (n * n)

    schedule_set = build_schedules(dag)
    rank: Dict[str, float] = {}
    for group in reversed(schedule_set.schedules):
        for mid in group:
            best_succ = 0.0
            for flow in dag.succs[mid]:
                best_succ = max(best_succ, transfer_cost(flow) + rank[flow.dst])
            rank[mid] = exec_cost(mid) + best_succ
    return rank


def rank_modules(dag: AppDag, ready_servers: Sequence[ServerId], weights,
                 topology: Topology, profile) -> Dict[int, List[str]]:
    """Per-schedule dispatch order: rank descending, ties broken by module id."""
    rank = compute_rank(dag, ready_servers, weights, topology, profile)
    schedule_set = build_schedules(dag)
    out: Dict[int, List[str]] = {}
    for pos, group in enumerate(schedule_set.schedules, start=1):
        out[pos] = sorted(group, key=lambda mid: (-rank[mid], mid))
    return out


# -- bundled application templates ---------------------------------------

def _ecg_modules(ram):
    return (
        [Module("sensor", pinned_to_device=True, container_ram_mb=0.0),
         Module("filter", container_ram_mb=ram()),
         Module("hr_analyzer", container_ram_mb=ram()),
         Module("arrhythmia_detector", container_ram_mb=ram()),
         Module("aggregator", container_ram_mb=ram()),
         Module("display", pinned_to_device=True, container_ram_mb=0.0)],
        [DataFlow("sensor", "filter", 20.0, 64e3),
         DataFlow("filter", "hr_analyzer", 25.0, 32e3),
         DataFlow("filter", "arrhythmia_detector", 30.0, 32e3),
         DataFlow("hr_analyzer", "aggregator", 10.0, 16e3),
         DataFlow("arrhythmia_detector", "aggregator", 10.0, 16e3),
         DataFlow("aggregator", "display", 2.0, 16e3)],
        0.010,
    )


def _eeg_modules(ram):
    return (
        [Module("sensor", pinned_to_device=True, container_ram_mb=0.0),
         Module("client_filter", container_ram_mb=ram()),
         Module("concentration_calculator", container_ram_mb=ram()),
         Module("game_state", container_ram_mb=ram()),
         Module("display", pinned_to_device=True, container_ram_mb=0.0)],
        [DataFlow("sensor", "client_filter", 10.0, 48e3),
         DataFlow("client_filter", "concentration_calculator", 15.0, 24e3),
         DataFlow("concentration_calculator", "game_state", 8.0, 24e3),
         DataFlow("game_state", "display", 2.0, 16e3)],
        0.015,
    )


TEMPLATES = {
    "ECGMH": _ecg_modules,
    "EEGTBG": _eeg_modules,
}


def build_app(template: str, app_id: str, rng=None,
              ram_range=(50.0, 75.0)) -> AppDag:
    """Instantiate a bundled template; container RAM is drawn per module."""
    if template not in TEMPLATES:
        raise ValueError(f"unknown app template {template!r}")

    def ram():
        if rng is None:
            return sum(ram_range) / 2.0
        return rng.uniform(*ram_range)

    modules, flows, interval = TEMPLATES[template](ram)
    return AppDag(app_id=app_id, template=template, modules=modules,
                  flows=flows, sensor_interval_s=interval)
