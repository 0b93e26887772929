"""Deterministic discrete-event simulation engine.

Single event kernel (time, insertion sequence) drives mobility ticks,
placement cascades, handovers, and migration rounds. Task emissions are not
individual events: per-task cost is constant between placement changes, so
emissions are accumulated segment-wise with closed-form counts, which keeps
reference-scale runs fast while preserving exact per-task arithmetic.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from . import baselines, cost_model, migration, placement
from .app_model import AppDag, ScheduleSet, build_schedules, rank_modules
from .clustering import bootstrap_clusters
from .cost_model import Placement
from .placement import CapacityLedger
from .scenario import DeviceSetup, World, build_world, stream
from .topology import ServerId, Topology

POLICIES = ("proposed", "maas", "urmila")


@dataclass
class Event:
    timestamp: float
    sequence: int
    kind: str
    payload: dict

    def __lt__(self, other):
        return (self.timestamp, self.sequence) < (other.timestamp, other.sequence)


class Kernel:
    """Minimal heap-based event kernel with stable FIFO tie-breaking."""

    def __init__(self):
        self.now = 0.0
        self._seq = 0
        self._heap: List[Tuple[Event, Callable]] = []

    def schedule(self, at: float, kind: str, handler: Callable, payload: Optional[dict] = None):
        if at < self.now - 1e-12:
            raise ValueError(f"cannot schedule {kind} in the past ({at} < {self.now})")
        self._seq += 1
        heapq.heappush(self._heap, (Event(at, self._seq, kind, payload or {}), handler))

    def run(self, until: float):
        while self._heap and self._heap[0][0].timestamp <= until + 1e-12:
            event, handler = heapq.heappop(self._heap)
            self.now = event.timestamp
            handler(event)
        self.now = until


class TaskAccumulator:
    """Closed-form per-device task ledger.

    Tasks are emitted every `interval_s` from service start. Between change
    points the per-task response/energy is constant, so each segment is
    folded in O(1). Downtime windows mark emissions as interrupted: in delay
    mode they finish at the window end, in drop mode they are lost.
    """

    def __init__(self, interval_s: float, mode: str = "delay"):
        self.interval = interval_s
        self.mode = mode
        self.t0: Optional[float] = None
        self.seg_start = 0.0
        self.cost_time = 0.0
        self.cost_energy = 0.0
        self.emitted = 0
        self.resp_sum = 0.0
        self.energy_sum = 0.0
        self.interrupted = 0
        self.dropped = 0
        self.windows: List[List[float]] = []

    def start_service(self, t0: float, cost_time: float, cost_energy: float):
        self.t0 = t0
        self.seg_start = t0
        self.cost_time = cost_time
        self.cost_energy = cost_energy

    def _count(self, a: float, b: float) -> Tuple[int, float]:
        """Emissions te = t0 + m * interval in [a, b): count and sum of te."""
        if self.t0 is None or b <= a:
            return 0, 0.0
        lo = max(0, math.ceil((a - self.t0) / self.interval - 1e-9))
        hi = max(0, math.ceil((b - self.t0) / self.interval - 1e-9))
        k = hi - lo
        if k <= 0:
            return 0, 0.0
        sum_te = k * self.t0 + self.interval * (lo + hi - 1) * k / 2.0
        return k, sum_te

    def add_window(self, w0: float, w1: float):
        """Record a downtime window; overlapping windows merge into one."""
        if w1 <= w0:
            return
        merged = [w0, w1]
        keep = []
        for win in self.windows:
            if win[1] < merged[0] or win[0] > merged[1]:
                keep.append(win)
            else:
                merged[0] = min(merged[0], win[0])
                merged[1] = max(merged[1], win[1])
        keep.append(merged)
        keep.sort()
        self.windows = keep

    def flush(self, now: float):
        """Fold all emissions in [seg_start, now) into the counters."""
        if self.t0 is None or now <= self.seg_start:
            return
        a, b = self.seg_start, now
        k, _ = self._count(a, b)
        self.emitted += k
        self.resp_sum += k * self.cost_time
        self.energy_sum += k * self.cost_energy
        remaining = []
        for w0, w1 in self.windows:
            lo, hi = max(w0, a), min(w1, b)
            kw, sum_te = self._count(lo, hi)
            if kw:
                self.interrupted += kw
                if self.mode == "delay":
                    self.resp_sum += kw * w1 - sum_te
                else:
                    self.resp_sum -= kw * self.cost_time
                    self.energy_sum -= kw * self.cost_energy
                    self.dropped += kw
            if w1 > b:
                remaining.append([max(w0, b), w1])
        self.windows = remaining
        self.seg_start = now

    def set_cost(self, now: float, cost_time: float, cost_energy: float):
        self.flush(now)
        self.cost_time = cost_time
        self.cost_energy = cost_energy

    def snapshot(self, at: float) -> dict:
        self.flush(at)
        inflight, _ = self._count(max(self.t0 or at, at - self.cost_time), at)
        completed = self.emitted - self.dropped - inflight
        return {"emitted": self.emitted, "completed": completed,
                "inflight": inflight, "dropped": self.dropped,
                "interrupted": self.interrupted,
                "resp_sum": self.resp_sum, "energy_sum": self.energy_sum}


def random_walk_step(position, leg, area, rng, dt, speed_range, leg_range):
    """Advance one mobility tick; returns (position, leg, velocity).

    `leg` is (target, speed) or None; a new leg is drawn when none is active
    or the target is reached. Positions clamp to the area; hitting a wall
    ends the leg.
    """
    width, height = area
    if leg is None:
        theta = rng.uniform(0.0, 2.0 * math.pi)
        dist = rng.uniform(*leg_range)
        target = (min(max(position[0] + dist * math.cos(theta), 0.0), width),
                  min(max(position[1] + dist * math.sin(theta), 0.0), height))
        speed = rng.uniform(*speed_range)
        leg = (target, speed)
    target, speed = leg
    dx = target[0] - position[0]
    dy = target[1] - position[1]
    dist = math.hypot(dx, dy)
    step = speed * dt
    if dist <= step or dist == 0.0:
        return target, None, (0.0, 0.0) if dist == 0.0 else (dx / max(dist, 1e-12) * speed,
                                                             dy / max(dist, 1e-12) * speed)
    ux, uy = dx / dist, dy / dist
    new_pos = (position[0] + ux * step, position[1] + uy * step)
    return new_pos, leg, (ux * speed, uy * speed)


@dataclass
class SimDevice:
    setup: DeviceSetup
    schedule_set: ScheduleSet
    placement: Placement
    controller: ServerId
    position: Tuple[float, float]
    acc: TaskAccumulator
    rng_mob: object
    leg: Optional[tuple] = None
    velocity: Tuple[float, float] = (0.0, 0.0)
    ranked: Optional[Dict[int, List[str]]] = None
    service_start: Optional[float] = None
    pdt_s: Optional[float] = None
    mmt_busy: bool = False
    pending_departure: bool = False
    inflight: set = field(default_factory=set)
    claimed: set = field(default_factory=set)
    mig_events: List[tuple] = field(default_factory=list)  # (ts, moves, cmt, cmec)

    @property
    def sid(self) -> ServerId:
        return self.setup.sid

    @property
    def dag(self) -> AppDag:
        return self.setup.dag


@dataclass
class SimResult:
    policy: str
    seed: int
    horizons: List[float]
    rows: List[dict]
    events: List[dict]
    pdt_mean_s: float


class Simulation:
    def __init__(self, config: dict):
        if config["policy"] not in POLICIES:
            raise ValueError(f"unknown policy {config['policy']!r}")
        self.config = config
        self.policy = config["policy"]
        self.world: World = build_world(config)
        self.topology: Topology = self.world.topology
        self.weights = self.world.weights
        self.profile = self.world.profile
        self.mig_params = self.world.migration
        self.ledger = CapacityLedger(self.topology)
        self.kernel = Kernel()
        self.events: List[dict] = []
        seed = config["seed"]
        self.rng_fail = stream(seed, "failure")
        self.rng_dump = stream(seed, "dump")
        self.rng_unreach = stream(seed, "unreach")
        self.failure_p = float(config["failure"]["migration_failure_p"])
        self.startup_s = float(config["container_startup_s"])
        self.sensor_lat = float(config["sensor_attach_latency_s"])
        self.central = ServerId(int(config["fog_levels"]), 1)
        self.queue = baselines.CentralQueue(float(config["urmila"]["service_time_s"]))
        if self.policy == "proposed":
            self.cluster_states = bootstrap_clusters(self.topology)
        else:
            self.cluster_states = {}
        mob = config["mobility"]
        self.tick_s = float(mob["tick_s"])
        self.speed_range = (float(mob["speed_min_mps"]), float(mob["speed_max_mps"]))
        self.leg_range = (float(mob["leg_min_m"]), float(mob["leg_max_m"]))
        self.margin = float(mob["departure_margin"])
        self.area = (float(config["area"]["width_m"]), float(config["area"]["height_m"]))
        mode = config["interrupted_mode"]
        self.devices: List[SimDevice] = []
        for setup in self.world.devices:
            schedule_set = build_schedules(setup.dag)
            plc = Placement(setup.dag.app_id)
            for m in setup.dag.modules:
                if m.pinned_to_device:
                    plc.assignment[m.id] = setup.sid
            self.devices.append(SimDevice(
                setup=setup, schedule_set=schedule_set, placement=plc,
                controller=self.topology.node(setup.sid).parent,
                position=setup.position,
                acc=TaskAccumulator(setup.dag.sensor_interval_s, mode),
                rng_mob=stream(seed, f"mob:{setup.sid.index}")))

    # -- helpers -----------------------------------------------------------

    def log(self, kind: str, **detail):
        self.events.append({"t": round(self.kernel.now, 9), "kind": kind, **detail})

    def lat(self, a: ServerId, b: ServerId) -> float:
        return cost_model.internodal_latency(self.topology, a, b)

    def _refresh_cost(self, dev: SimDevice, now: float):
        t, e = cost_model.app_cost_breakdown(
            self.topology, dev.dag, dev.placement, dev.schedule_set, self.profile)
        dev.acc.set_cost(now, t + self.sensor_lat, e)

    def _dump_bits(self, dev: SimDevice, module_id: str) -> float:
        ram_mb = dev.dag.module_map[module_id].container_ram_mb
        frac = self.rng_dump.uniform(*self.mig_params.dump_fraction)
        return frac * ram_mb * 8e6

    def _remaining_mi(self, dev: SimDevice, module_id: str, at: float) -> float:
        frm = dev.placement.assignment[module_id]
        offset = 0.0
        pos = dev.schedule_set.order_of[module_id]
        for p, group in enumerate(dev.schedule_set.schedules, start=1):
            if p >= pos:
                break
            t, _ = cost_model.schedule_cost(self.topology, dev.dag, dev.placement,
                                            self.profile, group)
            offset += t
        return migration.remaining_instructions(
            dev.dag.incoming_mi(module_id), self.topology.node(frm).cpu_mips,
            dev.dag.sensor_interval_s, offset, at,
            dev.service_start if dev.service_start is not None else at)

    # -- placement ---------------------------------------------------------

    def _request_placement(self, event: Event):
        dev = self.devices[event.payload["device"] - 1]
        t0 = self.kernel.now
        todo = dev.dag.unpinned()
        if self.policy == "urmila":
            self._place_urmila(dev, t0, todo)
            return
        controller = dev.controller
        arrival = t0 + self.topology.links.lat_up[0]
        if self.policy == "proposed":
            dev.ranked = rank_modules(dev.dag, placement.ready_servers(self.topology, controller),
                                      self.weights, self.topology, self.profile)
        last_ack = self._place_cascade(dev, controller, todo, arrival)
        dev.pdt_s = last_ack - t0
        service_start = last_ack + self.topology.links.lat_up[0]
        self._start_service(dev, service_start)

    def _place_cascade(self, dev: SimDevice, controller: ServerId,
                       todo: List[str], t: float) -> float:
        if self.policy == "maas":
            plan = baselines.maas_place(self.topology, self.ledger, controller,
                                        dev.dag, dev.placement, dev.schedule_set, todo)
        else:
            plan = placement.dapt_place(
                self.topology, self.ledger, controller, dev.dag, dev.placement,
                dev.schedule_set, dev.ranked or {}, todo, self.weights, self.profile)
        acks = [t]
        remote = plan.by_server()
        for server in sorted(remote):
            decs = remote[server]
            if server == controller:
                for dec in decs:
                    start = t + (0.0 if dec.warm else self.startup_s)
                    acks.append(start)
                    self.log("container_start", device=dev.sid.index, module=dec.module,
                             server=str(server), warm=dec.warm)
                continue
            t_arr = t + self.lat(controller, server)
            results = placement.handle_remote_placement(
                self.topology, self.ledger, server, dev.dag, [d.module for d in decs])
            for dec, (module_id, ok, warm) in zip(decs, results):
                if not ok:
                    rec = placement.dapt_failure_recovery(
                        self.topology, self.ledger, controller, server, dev.dag,
                        dev.placement, dev.schedule_set, dev.ranked or {},
                        [module_id], self.weights, self.profile)
                    self.log("placement_recovery", device=dev.sid.index,
                             module=module_id, failed=str(server))
                    for rdec in rec.decisions:
                        start = t_arr + self.lat(server, controller) \
                            + self.lat(controller, rdec.server) \
                            + (0.0 if rdec.warm else self.startup_s)
                        acks.append(start + self.lat(rdec.server, controller))
                    if rec.escalated:
                        parent = self.topology.node(controller).parent
                        sub = self._place_cascade(dev, parent, rec.escalated,
                                                  t_arr + self.lat(server, parent))
                        acks.append(sub + self.lat(parent, controller))
                    continue
                start = t_arr + (0.0 if warm else self.startup_s)
                acks.append(start + self.lat(server, controller))
                self.log("container_start", device=dev.sid.index, module=module_id,
                         server=str(server), warm=warm)
        if plan.escalated:
            parent = self.topology.node(controller).parent
            sub = self._place_cascade(dev, parent, plan.escalated,
                                      t + self.lat(controller, parent))
            acks.append(sub + self.lat(parent, controller))
        return max(acks)

    def _place_urmila(self, dev: SimDevice, t0: float, todo: List[str]):
        controller = dev.controller
        arrival = t0 + self.topology.links.lat_up[0] + self.lat(controller, self.central)
        t_dec = self.queue.admit(arrival)
        dev.ranked = rank_modules(dev.dag, self.topology.fog_servers(),
                                  self.weights, self.topology, self.profile)
        plan = baselines.urmila_place(
            self.topology, self.ledger, self.central, dev.dag, dev.placement,
            dev.schedule_set, dev.ranked, todo, self.weights, self.profile)
        acks = [t_dec]
        for dec in plan.decisions:
            t_arr = t_dec + self.lat(self.central, dec.server)
            start = t_arr + (0.0 if dec.warm else self.startup_s)
            acks.append(start + self.lat(dec.server, self.central))
            self.log("container_start", device=dev.sid.index, module=dec.module,
                     server=str(dec.server), warm=dec.warm)
        last = max(acks) + self.lat(self.central, controller)
        dev.pdt_s = last - t0
        self._start_service(dev, last + self.topology.links.lat_up[0])

    def _start_service(self, dev: SimDevice, at: float):
        def handler(event: Event):
            dev.service_start = self.kernel.now
            t, e = cost_model.app_cost_breakdown(
                self.topology, dev.dag, dev.placement, dev.schedule_set, self.profile)
            dev.acc.start_service(self.kernel.now, t + self.sensor_lat, e)
            self.log("service_start", device=dev.sid.index)
        self.kernel.schedule(at, "service_start", handler, {"device": dev.sid.index})

    # -- mobility and handover ----------------------------------------------

    def _tick(self, event: Event):
        dt = self.tick_s
        for dev in self.devices:
            dev.position, dev.leg, dev.velocity = random_walk_step(
                dev.position, dev.leg, self.area, dev.rng_mob, dt,
                self.speed_range, self.leg_range)
            self.topology.node(dev.sid).position = dev.position
            if dev.service_start is None:
                continue
            ctrl = self.topology.node(dev.controller)
            if dev.mmt_busy:
                # Only a confirmed exit latches a follow-up handover; margin
                # wobble during coordination resolves by itself.
                if math.hypot(dev.position[0] - ctrl.position[0],
                              dev.position[1] - ctrl.position[1]) > ctrl.coverage_radius:
                    dev.pending_departure = True
                continue
            if migration.departure_imminent(ctrl.position, ctrl.coverage_radius,
                                            dev.position, dev.velocity, self.margin):
                self._start_departure(dev)
        self.kernel.schedule(self.kernel.now + dt, "tick", self._tick)

    def _start_departure(self, dev: SimDevice):
        now = self.kernel.now
        old = dev.controller
        sensed = self.topology.sensed_by(dev.position)
        cands = [s for s in sensed if s != old]
        if not cands:
            return
        if self.policy == "proposed":
            required = sum(1 for sid in dev.placement.assignment.values() if sid == old)
            dest = migration.analyze_mobility(
                self.topology, old, dev.position, dev.velocity, sensed,
                required, self.ledger, self.rng_unreach)
        else:
            dest = baselines.nearest_controller(cands)
        if dest is None:
            return
        dev.mmt_busy = True
        self.log("handover", device=dev.sid.index, frm=str(old), to=str(dest))
        if self.policy == "urmila":
            t_dec = self.queue.admit(now + self.lat(old, self.central))
            attach_at = t_dec + self.lat(self.central, dest)
        else:
            attach_at = now + self.lat(old, dest)
        self.kernel.schedule(attach_at, "attach", lambda e: self._attach(dev, dest))

    def _attach(self, dev: SimDevice, dest: ServerId):
        now = self.kernel.now
        self.topology.set_parent(dev.sid, dest)
        dev.controller = dest
        self._refresh_cost(dev, now)
        central = self.central if self.policy == "urmila" else None
        rounds = migration.plan_rounds(self.topology, dest, dev.dag,
                                       dev.placement, dev.schedule_set, central,
                                       exclude=sorted(dev.inflight | dev.claimed))
        for rnd in rounds:
            for mods in rnd.by_decider.values():
                dev.claimed.update(mods)
        if self.policy == "urmila":
            # Centrally coordinated rounds run in the background: the device
            # is released at attach while earlier plans finish whatever
            # relocations they already own (the claim set keeps plans disjoint).
            dev.mmt_busy = False
        self._run_round(dev, dest, rounds, 0, now)

    # -- migration rounds ----------------------------------------------------

    def _run_round(self, dev: SimDevice, new_ctrl: ServerId,
                   rounds: List[migration.MigrationRound], k: int, t: float):
        if k >= len(rounds):
            dev.mmt_busy = False
            if dev.pending_departure:
                # A departure latched while coordinating proceeds right away.
                dev.pending_departure = False
                self._start_departure(dev)
            return
        rnd = rounds[k]
        for mods in rnd.by_decider.values():
            dev.claimed.difference_update(mods)
        working = dev.placement.copy()
        completions = [t]
        moves = 0
        cmt = 0.0
        cmec = 0.0
        for decider in sorted(rnd.by_decider):
            modules = rnd.by_decider[decider]
            outs = self._decide_migrations(dev, new_ctrl, decider, modules, working, t)
            for notify, window, energy, moved in outs:
                completions.append(notify)
                if moved:
                    moves += 1
                    cmt = max(cmt, window)
                    cmec = max(cmec, energy)
        done = max(completions)
        if moves:
            dev.mig_events.append((done, moves, cmt, cmec))
        self.kernel.schedule(done, "round",
                             lambda e: self._run_round(dev, new_ctrl, rounds, k + 1, done))

    def _decide_migrations(self, dev: SimDevice, new_ctrl: ServerId,
                           decider: ServerId, modules: List[str],
                           working: Placement, t: float):
        """Returns per-module (notify_time, window_len, energy, moved)."""
        outs = []
        if self.policy == "urmila":
            # Central relocation along the new serving chain. The controller
            # commits the cheapest candidate outright: the admissibility
            # handshake is part of the distributed protocol, not the baseline.
            t_dec = self.queue.admit(t + self.lat(new_ctrl, decider))
            for module_id in modules:
                prev = working.assignment[module_id]
                anchor = self.topology.ancestor_at_level(new_ctrl, max(prev.level, 1) + 1) \
                    or self.topology.cloud_id
                outs.append(self._decide_one(dev, new_ctrl, decider, anchor, module_id,
                                             working, t_dec, exclude=[prev]))
            return outs
        # Distributed deciders escalate whole subsets up the chain.
        t_dec = t + self.lat(new_ctrl, decider)
        use_cluster = self.policy == "proposed"
        pending = list(modules)
        cur = decider
        while pending:
            decisions = migration.handle_migration_req(
                self.topology, self.ledger, cur, dev.dag, working,
                dev.schedule_set, pending, self.weights, self.profile,
                self.mig_params,
                lambda m: self._dump_bits(dev, m),
                lambda m: self._remaining_mi(dev, m, t_dec),
                use_cluster=use_cluster)
            nxt = []
            for dec in decisions:
                if dec.escalate:
                    nxt.append(dec.module)
                    continue
                outs.append(self._commit_migration(dev, new_ctrl, cur, dec, working, t_dec))
            pending = nxt
            if pending:
                parent = self.topology.node(cur).parent
                if parent is None:
                    for module_id in pending:
                        # Nothing above the cloud: the module stays in place.
                        self.log("migration_stay", device=dev.sid.index, module=module_id)
                        outs.append((t_dec + self.lat(cur, new_ctrl), 0.0, 0.0, False))
                    break
                t_dec = t_dec + self.lat(cur, parent)
                cur = parent
        return outs

    def _decide_one(self, dev: SimDevice, new_ctrl: ServerId, decider: ServerId,
                    anchor: ServerId, module_id: str, working: Placement,
                    t_dec: float, exclude=()):
        """Central single-module decision anchored on the serving chain."""
        cur = anchor
        while True:
            cands = migration.migration_candidates(self.topology, cur, use_cluster=False)
            decisions = migration.handle_migration_req(
                self.topology, self.ledger, decider, dev.dag, working,
                dev.schedule_set, [module_id], self.weights, self.profile,
                self.mig_params,
                lambda m: self._dump_bits(dev, m),
                lambda m: self._remaining_mi(dev, m, t_dec),
                use_cluster=False, candidates=cands, exclude=exclude,
                check_admissibility=False)
            dec = decisions[0]
            if not dec.escalate:
                return self._commit_migration(dev, new_ctrl, decider, dec, working, t_dec)
            parent = self.topology.node(cur).parent
            if parent is None:
                self.log("migration_stay", device=dev.sid.index, module=module_id)
                return (t_dec + self.lat(decider, new_ctrl), 0.0, 0.0, False)
            cur = parent

    def _commit_migration(self, dev: SimDevice, new_ctrl: ServerId,
                          decider: ServerId, dec: migration.MigrationDecision,
                          working: Placement, t_dec: float):
        module_id = dec.module
        frm, to = dec.frm, dec.to
        if to == frm:
            return (t_dec + self.lat(decider, new_ctrl), 0.0, 0.0, False)
        # Confirmation at the target: capacity reservation plus injected failures.
        excluded: List[ServerId] = []
        mc = dec.cost
        while True:
            failed = self.failure_p > 0.0 and self.rng_fail.random() < self.failure_p
            if not failed and self.ledger.reserve(to, dev.dag.template, module_id):
                break
            self.log("migration_failure", device=dev.sid.index, module=module_id,
                     target=str(to))
            excluded.append(to)
            working.assignment[module_id] = frm
            t_dec = t_dec + self.lat(decider, to) + self.lat(to, decider)
            rec = migration.mmt_failure_recovery(
                self.topology, self.ledger, decider, dev.dag, working,
                dev.schedule_set, module_id, to, self.weights, self.profile,
                self.mig_params,
                lambda m: self._dump_bits(dev, m),
                lambda m: self._remaining_mi(dev, m, t_dec),
                use_cluster=self.policy == "proposed", exclude=excluded[:-1],
                check_admissibility=self.policy != "urmila")
            dec2 = rec[0]
            if dec2.escalate or dec2.to == frm:
                working.assignment[module_id] = frm
                self.log("migration_stay", device=dev.sid.index, module=module_id)
                return (t_dec + self.lat(decider, new_ctrl), 0.0, 0.0, False)
            to, mc = dec2.to, dec2.cost
        coord = self.lat(decider, to) + self.lat(to, frm)
        dev.inflight.add(module_id)
        w_start = t_dec
        w_end = t_dec + coord + mc.time_s
        dev.acc.add_window(w_start, w_end)
        energy = mc.energy_j + coord * self.profile.p_idle_w
        window_len = w_end - w_start
        self.log("migration", device=dev.sid.index, module=module_id,
                 frm=str(frm), to=str(to), window_s=round(window_len, 9))

        def commit(event: Event):
            dev.inflight.discard(module_id)
            dev.placement.assignment[module_id] = to
            self.ledger.release(frm, dev.dag.template, module_id)
            self._refresh_cost(dev, self.kernel.now)

        self.kernel.schedule(w_end, "migration_commit", commit,
                             {"device": dev.sid.index, "module": module_id})
        notify = w_end + self.lat(to, new_ctrl)
        return (notify, window_len, energy, True)

    # -- run and summarize ---------------------------------------------------

    def run(self, horizons: Optional[List[float]] = None) -> SimResult:
        horizons = sorted(horizons or [float(self.config["horizon_s"])])
        end = horizons[-1]
        for i, dev in enumerate(self.devices):
            self.kernel.schedule(0.001 * i, "placement_request",
                                 self._request_placement, {"device": dev.sid.index})
        self.kernel.schedule(self.tick_s, "tick", self._tick)
        snapshots: Dict[float, List[dict]] = {}

        def checkpoint(event: Event):
            h = event.payload["h"]
            snap = []
            for dev in self.devices:
                row = dev.acc.snapshot(h)
                row["template"] = dev.setup.template
                row["pdt_s"] = dev.pdt_s
                row["migrations"] = sum(m for ts, m, _, _ in dev.mig_events if ts <= h)
                row["cmt_s"] = sum(c for ts, _, c, _ in dev.mig_events if ts <= h)
                row["cmec_j"] = sum(c for ts, _, _, c in dev.mig_events if ts <= h)
                snap.append(row)
            snapshots[h] = snap

        for h in horizons:
            self.kernel.schedule(h, "checkpoint", checkpoint, {"h": h})
        self.kernel.run(end)

        rows = []
        templates = sorted({dev.setup.template for dev in self.devices})
        fr_mode = "fr" if self.failure_p > 0 else "none"
        for h in horizons:
            for template in templates:
                sub = [r for r in snapshots[h] if r["template"] == template]
                served = sum(r["emitted"] - r["dropped"] for r in sub)
                resp = sum(r["resp_sum"] for r in sub)
                energy = sum(r["energy_sum"] for r in sub)
                artt = resp / served if served else 0.0
                aect = energy / served if served else 0.0
                pdts = [r["pdt_s"] for r in sub if r["pdt_s"] is not None]
                cmt = sum(r["cmt_s"] for r in sub)
                cmec = sum(r["cmec_j"] for r in sub)
                rows.append({
                    "technique": self.policy, "app": template, "horizon_s": h,
                    "seed": self.config["seed"],
                    "pdt_s": sum(pdts) / len(pdts) if pdts else 0.0,
                    "artt_s": artt, "aect_j": aect,
                    "awct": self.weights.w1 * artt + self.weights.w2 * aect,
                    "migrations": sum(r["migrations"] for r in sub),
                    "cmt_s": cmt, "cmec_j": cmec,
                    "cmwc": self.weights.w1 * cmt + self.weights.w2 * cmec,
                    "tit": sum(r["interrupted"] for r in sub),
                    "fr_mode": fr_mode,
                    "emitted": sum(r["emitted"] for r in sub),
                    "completed": sum(r["completed"] for r in sub),
                    "inflight": sum(r["inflight"] for r in sub),
                    "dropped": sum(r["dropped"] for r in sub),
                })
        pdts = [d.pdt_s for d in self.devices if d.pdt_s is not None]
        return SimResult(policy=self.policy, seed=self.config["seed"],
                         horizons=horizons, rows=rows, events=self.events,
                         pdt_mean_s=sum(pdts) / len(pdts) if pdts else 0.0)


def run_simulation(config: dict, horizons: Optional[List[float]] = None) -> SimResult:
    return Simulation(config).run(horizons)
