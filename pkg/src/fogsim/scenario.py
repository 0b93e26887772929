"""Scenario files: schema defaults, loading, and world construction.

A scenario is a YAML mapping; anything omitted falls back to the defaults
below. `build_world` turns a scenario into a topology plus per-device
application instances, all drawn from seed-derived streams so the same
(scenario, seed) pair always builds the same world.
"""
from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import yaml

from . import app_model
from .cost_model import CostWeights, DeviceEnergyProfile, MigrationParams
from .topology import LinkParams, ServerId, ServerNode, Topology

DEFAULTS: Dict = {
    "name": "scenario",
    "seed": 1,
    "policy": "proposed",
    "horizon_s": 400.0,
    "area": {"width_m": 2000.0, "height_m": 1000.0},
    "weights": {"w1": 0.5, "w2": 0.5},
    "energy": {"p_cpu_w": 0.9, "p_idle_w": 0.3, "p_tx_w": 1.3},
    "migration": {"i_mig_s": 0.05, "epsilon_frac": 0.05,
                  "dump_fraction": [0.05, 0.10], "notification_timeout_s": 1.0},
    "mobility": {"tick_s": 0.1, "speed_min_mps": 0.5, "speed_max_mps": 4.0,
                 "leg_min_m": 100.0, "leg_max_m": 600.0, "departure_margin": 0.05},
    "failure": {"migration_failure_p": 0.0},
    "container_startup_s": 0.1,
    "sensor_attach_latency_s": 0.002,
    "interrupted_mode": "delay",
    "urmila": {"service_time_s": 0.001},
    "fog_levels": 3,
    "levels": [
        {"level": 1, "count": 30, "cols": 6, "rows": 5, "cpu_mips": [3000, 4000],
         "capacity": 10, "coverage_m": 200.0},
        {"level": 2, "count": 5, "cols": 5, "rows": 1, "cpu_mips": 8000,
         "capacity": 20, "coverage_m": 400.0},
        {"level": 3, "count": 1, "cols": 1, "rows": 1, "cpu_mips": 10000,
         "capacity": 60, "coverage_m": 0.0},
    ],
    "cloud": {"cpu_mips": 80000, "capacity": 100000},
    "links": {
        "lat_up_s": {0: 0.005, 1: 0.025, 2: 0.05, 3: 0.15},
        "lat_down_s": {0: 0.005, 1: 0.025, 2: 0.05, 3: 0.15},
        "lat_cluster_s": {1: 0.004, 2: 0.0225},
        "bw_up_bps": {0: 100e6, 1: 10e9, 2: 10e9, 3: 10e9},
        "bw_down_bps": {0: 200e6, 1: 10e9, 2: 10e9, 3: 10e9},
        "bw_cluster_bps": {1: 10e9, 2: 10e9},
    },
    "devices": {"count": 80, "ram_mb": [50.0, 75.0],
                "templates": ["ECGMH", "EEGTBG"]},
}


def _deep_merge(base: Dict, override: Dict) -> Dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_scenario(path: Optional[str] = None, overrides: Optional[Dict] = None) -> Dict:
    """Load a scenario file (YAML) merged over the defaults, then overrides."""
    config = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ValueError(f"scenario file {path} must hold a mapping")
        config = _deep_merge(config, user)
    if overrides:
        config = _deep_merge(config, overrides)
    return config


def effective_config(config: Dict) -> str:
    """Canonical, byte-stable dump of the fully resolved configuration."""
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=False)


def stream(seed, label: str) -> random.Random:
    """Independent deterministic stream derived from the master seed."""
    return random.Random(f"{seed}/{label}")


@dataclass
class DeviceSetup:
    sid: ServerId
    position: Tuple[float, float]
    template: str
    dag: app_model.AppDag


@dataclass
class World:
    config: Dict
    topology: Topology
    devices: List[DeviceSetup] = field(default_factory=list)
    weights: CostWeights = field(default_factory=CostWeights)
    profile: DeviceEnergyProfile = field(default_factory=DeviceEnergyProfile)
    migration: MigrationParams = field(default_factory=MigrationParams)


def _grid_positions(count: int, cols: int, rows: int,
                    width: float, height: float) -> List[Tuple[float, float]]:
    cell_w = width / cols
    cell_h = height / rows
    out = []
    for i in range(count):
        row, col = divmod(i, cols)
        out.append((cell_w * (col + 0.5), cell_h * (row % rows + 0.5)))
    return out


def _link_params(cfg: Dict) -> LinkParams:
    def table(name):
        return {int(k): float(v) for k, v in cfg[name].items()}
    return LinkParams(
        lat_up=table("lat_up_s"), lat_down=table("lat_down_s"),
        lat_cluster=table("lat_cluster_s"),
        bw_up=table("bw_up_bps"), bw_down=table("bw_down_bps"),
        bw_cluster=table("bw_cluster_bps"))


def build_world(config: Dict) -> World:
    """Materialize a scenario: servers on grids, devices at seeded positions."""
    seed = config["seed"]
    rng_topo = stream(seed, "topology")
    rng_dev = stream(seed, "devices")
    area = config["area"]
    width, height = float(area["width_m"]), float(area["height_m"])
    max_level = int(config["fog_levels"])

    nodes: List[ServerNode] = []
    by_level: Dict[int, List[ServerNode]] = {}
    for spec in sorted(config["levels"], key=lambda s: s["level"]):
        level = int(spec["level"])
        count = int(spec["count"])
        cols = int(spec.get("cols") or math.ceil(math.sqrt(count * width / height)))
        rows = int(spec.get("rows") or math.ceil(count / cols))
        positions = _grid_positions(count, cols, rows, width, height)
        cpu = spec["cpu_mips"]
        for idx in range(1, count + 1):
            mips = rng_topo.uniform(*cpu) if isinstance(cpu, (list, tuple)) else float(cpu)
            node = ServerNode(
                id=ServerId(level, idx), cpu_mips=mips,
                container_capacity=int(spec["capacity"]),
                position=positions[idx - 1],
                coverage_radius=float(spec.get("coverage_m", 0.0)))
            nodes.append(node)
            by_level.setdefault(level, []).append(node)

    cloud_cfg = config["cloud"]
    cloud = ServerNode(id=ServerId(max_level + 1, 1),
                       cpu_mips=float(cloud_cfg["cpu_mips"]),
                       container_capacity=int(cloud_cfg["capacity"]),
                       position=(width / 2.0, height / 2.0))
    nodes.append(cloud)
    by_level[max_level + 1] = [cloud]

    # Parents: geometrically nearest node one level up.
    for level in sorted(by_level):
        if level >= max_level + 1:
            continue
        uppers = by_level.get(level + 1, [])
        for node in by_level[level]:
            if not uppers:
                raise ValueError(f"no level-{level + 1} servers to parent {node.id}")
            best = min(uppers, key=lambda up: (node.distance_to(up.position), up.id))
            node.parent = best.id

    dev_cfg = config["devices"]
    templates = dev_cfg["templates"]
    device_setups = []
    for n in range(1, int(dev_cfg["count"]) + 1):
        pos = (rng_dev.uniform(0.0, width), rng_dev.uniform(0.0, height))
        template = templates[(n - 1) % len(templates)]
        dag = app_model.build_app(template, f"{template}:{n}",
                                  rng=stream(seed, f"ram:{n}"),
                                  ram_range=tuple(dev_cfg["ram_mb"]))
        sid = ServerId(0, n)
        level1 = by_level.get(1, [])
        covering = [fs for fs in level1 if fs.covers(pos)]
        pool = covering or level1
        home = min(pool, key=lambda fs: (fs.distance_to(pos), fs.id))
        nodes.append(ServerNode(id=sid, cpu_mips=500.0,
                                container_capacity=len(dag.modules),
                                position=pos, parent=home.id))
        device_setups.append(DeviceSetup(sid=sid, position=pos,
                                         template=template, dag=dag))

    topology = Topology(nodes, _link_params(config["links"]), max_level)
    weights = CostWeights(**{k: float(v) for k, v in config["weights"].items()})
    profile = DeviceEnergyProfile(**{k: float(v) for k, v in config["energy"].items()})
    mig_cfg = config["migration"]
    migration = MigrationParams(
        i_mig_s=float(mig_cfg["i_mig_s"]),
        epsilon_frac=float(mig_cfg["epsilon_frac"]),
        dump_fraction=tuple(float(x) for x in mig_cfg["dump_fraction"]),
        notification_timeout_s=float(mig_cfg["notification_timeout_s"]))
    return World(config=config, topology=topology, devices=device_setups,
                 weights=weights, profile=profile, migration=migration)
