"""Hierarchical fog topology: levels, parent links, clusters, descendant closures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, NamedTuple, Optional, Set, Tuple


class ServerId(NamedTuple):
    """Identity of a node in the hierarchy: (level, index), both 1-based except devices at level 0."""
    level: int
    index: int

    def __str__(self):
        return f"({self.level},{self.index})"


class TopologyError(ValueError):
    """Raised for malformed topology input (bad parent level, duplicate id, missing cloud)."""


class RoutingError(RuntimeError):
    """Raised when no route exists between two nodes."""


@dataclass
class LinkParams:
    """Per-level link constants.

    Up/down tables are keyed by the lower endpoint's level of the hop;
    cluster tables are keyed by the level the lateral hop happens at.
    Latencies in seconds, bandwidths in bits per second.
    """
    lat_up: Dict[int, float]
    lat_down: Dict[int, float]
    lat_cluster: Dict[int, float]
    bw_up: Dict[int, float]
    bw_down: Dict[int, float]
    bw_cluster: Dict[int, float]

    def validate(self, max_fog_level: int):
        for lvl in range(0, max_fog_level + 1):
            for table, name in ((self.lat_up, "lat_up"), (self.lat_down, "lat_down"),
                                (self.bw_up, "bw_up"), (self.bw_down, "bw_down")):
                if lvl not in table:
                    raise TopologyError(f"link table {name} missing level {lvl}")
                if table[lvl] <= 0 and "bw" in name:
                    raise TopologyError(f"non-positive bandwidth in {name}[{lvl}]")


@dataclass
class ServerNode:
    """One server (or IoT device, at level 0) in the hierarchy."""
    id: ServerId
    cpu_mips: float
    container_capacity: int
    position: Tuple[float, float] = (0.0, 0.0)
    coverage_radius: float = 0.0
    parent: Optional[ServerId] = None
    children: Set[ServerId] = field(default_factory=set)
    cluster_members: Set[ServerId] = field(default_factory=set)
    active_containers: int = 0
    alive: bool = True

    def distance_to(self, point: Tuple[float, float]) -> float:
        return math.hypot(self.position[0] - point[0], self.position[1] - point[1])

    def covers(self, point: Tuple[float, float]) -> bool:
        return self.coverage_radius > 0 and self.distance_to(point) <= self.coverage_radius


class Topology:
    """Mutable forest of fog servers plus cluster edges.

    Structural mutations (reparent, add, remove, cluster changes) must go
    through the mutator methods so the revision counter invalidates the
    descendant-closure cache.
    """

    def __init__(self, nodes: Iterable[ServerNode], links: LinkParams, max_fog_level: int):
        self.links = links
        self.max_fog_level = max_fog_level
        self.cloud_id = ServerId(max_fog_level + 1, 1)
        self.nodes: Dict[ServerId, ServerNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise TopologyError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        if self.cloud_id not in self.nodes:
            raise TopologyError(f"missing cloud node {self.cloud_id}")
        links.validate(max_fog_level)
        self.revision = 0
        self._omega_cache: Dict[ServerId, frozenset] = {}
        self._omega_rev = -1
        self._wire_children()
        self._check_levels()

    def _wire_children(self):
        for node in self.nodes.values():
            if node.parent is not None:
                if node.parent not in self.nodes:
                    raise TopologyError(f"{node.id} references unknown parent {node.parent}")
                self.nodes[node.parent].children.add(node.id)

    def _check_levels(self):
        for node in self.nodes.values():
            if node.parent is not None:
                par = self.nodes[node.parent]
                if par.id.level != node.id.level + 1:
                    raise TopologyError(
                        f"parent of {node.id} must sit one level up, got {par.id}")
            elif node.id != self.cloud_id and node.id.level <= self.max_fog_level:
                # Orphans below the cloud are legal mid-protocol but not at build time
                # for fog servers; devices may briefly detach during handover.
                if node.id.level > 0:
                    raise TopologyError(f"fog server {node.id} has no parent")

    # -- mutation ---------------------------------------------------------

    def bump(self):
        self.revision += 1

    def add_node(self, node: ServerNode):
        if node.id in self.nodes:
            raise TopologyError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        if node.parent is not None:
            self.nodes[node.parent].children.add(node.id)
        self.bump()

    def remove_node(self, sid: ServerId):
        """Remove a node and purge every reference to it (children, clusters, parents)."""
        node = self.nodes.pop(sid)
        if node.parent is not None and node.parent in self.nodes:
            self.nodes[node.parent].children.discard(sid)
        for other in self.nodes.values():
            other.children.discard(sid)
            other.cluster_members.discard(sid)
            if other.parent == sid:
                other.parent = None
        self.bump()

    def set_parent(self, child: ServerId, parent: Optional[ServerId]):
        node = self.nodes[child]
        if node.parent is not None and node.parent in self.nodes:
            self.nodes[node.parent].children.discard(child)
        node.parent = parent
        if parent is not None:
            if self.nodes[parent].id.level != child.level + 1:
                raise TopologyError(f"cannot parent {child} under {parent}")
            self.nodes[parent].children.add(child)
        self.bump()

    def link_cluster(self, a: ServerId, b: ServerId):
        if a.level != b.level:
            raise TopologyError(f"cluster edge must stay on one level: {a} {b}")
        self.nodes[a].cluster_members.add(b)
        self.nodes[b].cluster_members.add(a)
        self.bump()

    def unlink_cluster(self, a: ServerId, b: ServerId):
        self.nodes[a].cluster_members.discard(b)
        self.nodes[b].cluster_members.discard(a)
        self.bump()

    # -- queries ----------------------------------------------------------

    def node(self, sid: ServerId) -> ServerNode:
        return self.nodes[sid]

    def omega(self, sid: ServerId) -> frozenset:
        """Descendant closure of a node: itself plus everything reachable downward."""
        if self._omega_rev != self.revision:
            self._omega_cache.clear()
            self._omega_rev = self.revision
        cached = self._omega_cache.get(sid)
        if cached is not None:
            return cached
        members = {sid}
        stack = list(self.nodes[sid].children)
        while stack:
            cur = stack.pop()
            if cur in members or cur not in self.nodes:
                continue
            members.add(cur)
            stack.extend(self.nodes[cur].children)
        result = frozenset(members)
        self._omega_cache[sid] = result
        return result

    def has_hierarchical_path(self, src: ServerId, dest: ServerId) -> bool:
        """True when dest lies inside the descendant closure of src."""
        return dest in self.omega(src)

    def ancestor_at_level(self, sid: ServerId, level: int) -> Optional[ServerId]:
        cur = sid
        while cur is not None and cur.level < level:
            cur = self.nodes[cur].parent
        if cur is not None and cur.level == level:
            return cur
        return None

    def fog_servers(self, level: Optional[int] = None):
        """Alive fog/cloud servers (level >= 1), sorted by id."""
        out = [n.id for n in self.nodes.values()
               if n.alive and n.id.level >= 1 and (level is None or n.id.level == level)]
        return sorted(out)

    def sensed_by(self, point: Tuple[float, float], level: int = 1):
        """Alive servers of a level whose coverage contains the point, sorted by distance."""
        hits = [n for n in self.nodes.values()
                if n.alive and n.id.level == level and n.covers(point)]
        hits.sort(key=lambda n: (n.distance_to(point), n.id))
        return [n.id for n in hits]

    def in_mutual_range(self, a: ServerId, b: ServerId) -> bool:
        """Two same-level servers are cluster-eligible when each sits inside the smaller coverage."""
        na, nb = self.nodes[a], self.nodes[b]
        radius = min(na.coverage_radius, nb.coverage_radius)
        return radius > 0 and na.distance_to(nb.position) <= radius


def build_topology(node_specs: Iterable[dict], links: LinkParams, max_fog_level: int) -> Topology:
    """Build a topology from plain dict specs.

    Each spec carries: level, index, cpu_mips, capacity, and optionally
    parent (level, index) tuple, position, coverage_radius.
    """
    nodes = []
    for spec in node_specs:
        parent = spec.get("parent")
        nodes.append(ServerNode(
            id=ServerId(spec["level"], spec["index"]),
            cpu_mips=float(spec["cpu_mips"]),
            container_capacity=int(spec["capacity"]),
            position=tuple(spec.get("position", (0.0, 0.0))),
            coverage_radius=float(spec.get("coverage_radius", 0.0)),
            parent=ServerId(*parent) if parent is not None else None,
        ))
    return Topology(nodes, links, max_fog_level)
