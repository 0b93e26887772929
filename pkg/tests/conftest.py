"""Shared fixtures: a small reference hierarchy and link tables.

The reference layout is one cloud, one level-3 server, three level-2 servers,
and six level-1 servers (11 nodes), with (2,1) parenting (1,1)-(1,3),
(2,2) childless, and (2,3) parenting (1,4)-(1,6).
"""
import pytest

from fogsim.topology import LinkParams, ServerId, ServerNode, Topology

S = ServerId


def make_links() -> LinkParams:
    return LinkParams(
        lat_up={0: 0.005, 1: 0.025, 2: 0.05, 3: 0.15},
        lat_down={0: 0.005, 1: 0.025, 2: 0.05, 3: 0.15},
        lat_cluster={1: 0.004, 2: 0.0225},
        bw_up={0: 100e6, 1: 10e9, 2: 10e9, 3: 10e9},
        bw_down={0: 200e6, 1: 10e9, 2: 10e9, 3: 10e9},
        bw_cluster={1: 10e9, 2: 10e9},
    )


def make_small_topology(with_device: bool = False,
                        l1_capacity: int = 10) -> Topology:
    """11-node reference hierarchy; optionally adds device (0,5) under (1,1)."""
    nodes = [
        ServerNode(S(4, 1), cpu_mips=80000, container_capacity=100000,
                   position=(650.0, 0.0)),
        ServerNode(S(3, 1), cpu_mips=10000, container_capacity=60,
                   position=(650.0, 0.0), parent=S(4, 1)),
        ServerNode(S(2, 1), cpu_mips=8000, container_capacity=20,
                   position=(150.0, 0.0), coverage_radius=400.0, parent=S(3, 1)),
        ServerNode(S(2, 2), cpu_mips=8000, container_capacity=20,
                   position=(650.0, 0.0), coverage_radius=400.0, parent=S(3, 1)),
        ServerNode(S(2, 3), cpu_mips=8000, container_capacity=20,
                   position=(1150.0, 0.0), coverage_radius=400.0, parent=S(3, 1)),
    ]
    l1_parent = {1: S(2, 1), 2: S(2, 1), 3: S(2, 1),
                 4: S(2, 3), 5: S(2, 3), 6: S(2, 3)}
    l1_pos = {1: 0.0, 2: 150.0, 3: 300.0, 4: 1000.0, 5: 1150.0, 6: 1300.0}
    for i in range(1, 7):
        nodes.append(ServerNode(
            S(1, i), cpu_mips=4000 if i == 2 else 3500,
            container_capacity=l1_capacity,
            position=(l1_pos[i], 0.0), coverage_radius=200.0,
            parent=l1_parent[i]))
    if with_device:
        nodes.append(ServerNode(S(0, 5), cpu_mips=500, container_capacity=8,
                                position=(10.0, 0.0), parent=S(1, 1)))
    return Topology(nodes, make_links(), max_fog_level=3)


@pytest.fixture
def links():
    return make_links()


@pytest.fixture
def topo():
    return make_small_topology()


@pytest.fixture
def topo_dev():
    return make_small_topology(with_device=True)
