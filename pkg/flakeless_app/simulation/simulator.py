"""
Deterministic pod-churn simulation.

Every node owns a real Generator whose machine ID comes from
worker_id_from_ip of the address the pool hands it. All nodes read one shared
VirtualClock through a NodeClock that can lag behind it, which is how clock
regressions and lagging restarts are injected.

Each simulated millisecond:
    1. the shared clock is set
    2. that millisecond's events run (spawn, terminate, regress_clock)
    3. every live node tries to issue its demand plus any backlog; whatever
       the sequence space cannot absorb carries over to the next millisecond

Randomness (churn victims, jitter times and targets) comes from
numpy.random.default_rng(seed), i.e. PCG64, so a scenario reproduces exactly.
"""

import hashlib
import json
import logging
from array import array
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from flakeless_app.core.clock import ClockSource, VirtualClock
from flakeless_app.core.generator import DEFAULT_EPOCH_MILLIS, Generator, GeneratorConfig
from flakeless_app.errors import ClockMovedBackwards, GeneratorUnavailable, SimulationStall
from flakeless_app.identity.derivation import worker_id_from_ip
from flakeless_app.simulation.audit import IssuanceStream, audit_ids
from flakeless_app.simulation.ip_pool import IpPool
from flakeless_app.simulation.scenario import (
    RANDOM_NODE,
    SIM_START_OFFSET_MS,
    ChurnEvent,
    ChurnScenario,
    EventKind,
)

logger = logging.getLogger(__name__)


class NodeClock(ClockSource):
    """
    One node's view of the shared clock: shared reading minus `lag`.

    Sleeping shrinks the lag, i.e. the node's clock catches up. The simulator
    is single-threaded, so waiting for a later millisecond can never succeed
    from inside issuance and raises SimulationStall instead.
    """

    def __init__(self, shared: VirtualClock, lag: int = 0):
        self.shared = shared
        self.lag = lag

    def now_millis(self) -> int:
        return self.shared.now_millis() - self.lag

    def wait_until_after(self, last: int) -> int:
        now = self.now_millis()
        if now > last:
            return now
        raise SimulationStall(f"node clock at {now} cannot pass {last} this millisecond")

    def sleep_millis(self, millis: int) -> None:
        self.lag = max(0, self.lag - millis)


@dataclass
class SimNode:
    name: str
    ip: str
    machine_id: int
    generator: Generator
    clock: NodeClock
    started_ms: int
    ids: array = field(default_factory=lambda: array("Q"))
    backlog: int = 0
    alive: bool = True


class DrillOutcome(str, Enum):
    TOLERATED = "tolerated"
    FATAL = "fatal"


@dataclass(frozen=True)
class SimulationReport:
    scenario: str
    seed: int
    layout: str
    duration_ms: int
    total_ids: int
    distinct_ids: int
    collision_count: int
    per_node_monotonicity_violations: int
    cross_incarnation_violations: int
    blocked_milliseconds: int
    regressions_tolerated: int
    regressions_fatal: int
    nodes_spawned: int
    nodes_terminated: int
    ip_reuses: int
    max_ids_per_node_ms: int
    event_log: tuple
    event_log_digest: str

    @property
    def violations(self) -> int:
        return (self.collision_count + self.per_node_monotonicity_violations
                + self.cross_incarnation_violations)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "layout": self.layout,
            "duration_ms": self.duration_ms,
            "total_ids": self.total_ids,
            "distinct_ids": self.distinct_ids,
            "collision_count": self.collision_count,
            "per_node_monotonicity_violations": self.per_node_monotonicity_violations,
            "cross_incarnation_violations": self.cross_incarnation_violations,
            "blocked_milliseconds": self.blocked_milliseconds,
            "regression_outcomes": {
                "tolerated": self.regressions_tolerated,
                "fatal": self.regressions_fatal,
            },
            "nodes_spawned": self.nodes_spawned,
            "nodes_terminated": self.nodes_terminated,
            "ip_reuses": self.ip_reuses,
            "max_ids_per_node_ms": self.max_ids_per_node_ms,
            "events": len(self.event_log),
            "event_log_digest": self.event_log_digest,
            "violations": self.violations,
        }

    def render_text(self, show_events: bool = False) -> str:
        data = self.to_dict()
        outcomes = data.pop("regression_outcomes")
        data["regressions_tolerated"] = outcomes["tolerated"]
        data["regressions_fatal"] = outcomes["fatal"]
        width = max(len(k) for k in data)
        lines = [f"{key.ljust(width)}  {value}" for key, value in data.items()]
        lines.append("result".ljust(width) + ("  OK" if not self.violations else "  VIOLATIONS"))
        if show_events:
            lines.append("")
            lines.extend(self.event_log)
        return "\n".join(lines)

    def render_ndjson(self, show_events: bool = False) -> str:
        records = []
        if show_events:
            records.extend({"type": "event", "entry": entry} for entry in self.event_log)
        records.append({"type": "simulation_report", **self.to_dict()})
        return "\n".join(json.dumps(r, sort_keys=True) for r in records)


class ChurnSimulator:
    """Runs one ChurnScenario. Use run_simulation() unless you need the nodes afterwards."""

    def __init__(self, scenario: ChurnScenario):
        scenario.validate()
        self.scenario = scenario
        self.rng = np.random.default_rng(scenario.seed)
        self.start_ms = DEFAULT_EPOCH_MILLIS + SIM_START_OFFSET_MS
        self.clock = VirtualClock(start=self.start_ms)
        self.pool = IpPool(scenario.subnet, cooldown_ms=scenario.ip_reuse_cooldown_ms)

        self.nodes: List[SimNode] = []  # every incarnation, in spawn order
        self.live: Dict[str, SimNode] = {}
        self.event_log: List[str] = []

        self.blocked_ms = 0
        self.tolerated = 0
        self.fatal = 0
        self.terminated = 0

    # --- events -----------------------------------------------------------------

    def _log(self, t: int, message: str) -> None:
        self.event_log.append(f"t={t} {message}")

    def spawn(self, t: int) -> SimNode:
        s = self.scenario
        if s.allow_concurrent_duplicate_ip and t > 0 and self.live:
            ip = self.pool.allocate_duplicate()
        else:
            ip = self.pool.allocate(t)

        lag = s.restart_lag_ms if t > 0 else 0
        clock = NodeClock(self.clock, lag=lag)
        machine_id = worker_id_from_ip(ip)
        generator = Generator(
            GeneratorConfig(
                machine_id=machine_id,
                layout=s.layout,
                epoch_millis=DEFAULT_EPOCH_MILLIS,
                max_backward_tolerance_ms=s.max_backward_tolerance_ms,
            ),
            clock,
        )
        node = SimNode(f"node-{len(self.nodes)}", ip, machine_id, generator, clock, started_ms=t)
        self.nodes.append(node)
        self.live[node.name] = node
        self._log(t, f"spawn {node.name} ip={ip} machine_id={machine_id}"
                     + (f" lag={lag}" if lag else ""))
        return node

    def _stop(self, node: SimNode, t: int) -> None:
        node.alive = False
        del self.live[node.name]
        self.pool.release(node.ip, t)

    def terminate(self, t: int, name: Optional[str]) -> None:
        node = self._pick(name)
        if node is None:
            self._log(t, f"terminate {name} skipped (not live)")
            return
        self._stop(node, t)
        self.terminated += 1
        self._log(t, f"terminate {node.name} ip={node.ip} issued={len(node.ids)}")

    def regression_drill(self, node: SimNode, offset_ms: int, t: Optional[int] = None) -> DrillOutcome:
        """
        Step the node's clock back `offset_ms` from its latest issuance and
        attempt one issuance. Within tolerance the generator waits and goes
        on; beyond it the node stops and its address goes back to the pool.
        """
        t = self.clock.now_millis() - self.start_ms if t is None else t
        stats = node.generator.stats()
        reference = stats.last_time if stats.ids_issued else node.clock.now_millis()
        node.clock.lag = self.clock.now_millis() - (reference - offset_ms)

        try:
            node.ids.append(node.generator.next_id())
            node.backlog -= 1
        except ClockMovedBackwards as e:
            self.fatal += 1
            self._stop(node, t)
            self._log(t, f"regress_clock {node.name} offset={offset_ms} fatal ({e})")
            logger.info("[SIMULATOR] %s stopped: %s", node.name, e)
            return DrillOutcome.FATAL
        except SimulationStall:
            pass

        self.tolerated += 1
        self._log(t, f"regress_clock {node.name} offset={offset_ms} tolerated")
        return DrillOutcome.TOLERATED

    def _pick(self, name: Optional[str], issued_only: bool = False) -> Optional[SimNode]:
        if name in (None, RANDOM_NODE):
            names = [n for n, node in self.live.items() if node.ids or not issued_only]
            if not names:
                return None
            return self.live[names[int(self.rng.integers(len(names)))]]
        return self.live.get(name)

    def _apply(self, t: int, event: ChurnEvent) -> None:
        if event.kind is EventKind.SPAWN:
            self.spawn(t)
        elif event.kind is EventKind.TERMINATE:
            self.terminate(t, event.node)
        else:
            node = self._pick(event.node, issued_only=True)
            if node is None:
                self._log(t, f"regress_clock {event.node} skipped (not live)")
                return
            if not node.ids:
                # a clock step before the first ID is indistinguishable from restart lag
                self._log(t, f"regress_clock {node.name} skipped (no IDs issued yet)")
                return
            self.regression_drill(node, event.offset_ms, t)

    def _schedule(self) -> Dict[int, List[ChurnEvent]]:
        s = self.scenario
        events = list(s.churn_events)
        if s.churn_interval_ms:
            for at in range(s.churn_interval_ms, s.duration_ms, s.churn_interval_ms):
                events.append(ChurnEvent(at, EventKind.TERMINATE, RANDOM_NODE))
                events.append(ChurnEvent(at, EventKind.SPAWN))
        if s.jitter_count:
            times = self.rng.integers(1, max(2, s.duration_ms), size=s.jitter_count)
            offsets = self.rng.integers(1, s.jitter_max_offset_ms + 1, size=s.jitter_count)
            for at, offset in zip(times.tolist(), offsets.tolist()):
                events.append(ChurnEvent(at, EventKind.REGRESS_CLOCK, RANDOM_NODE, offset))

        schedule: Dict[int, List[ChurnEvent]] = {}
        # membership changes run before regressions within the same millisecond
        for event in sorted(events, key=lambda e: (e.at_ms, e.kind is EventKind.REGRESS_CLOCK)):
            schedule.setdefault(event.at_ms, []).append(event)
        return schedule

    # --- issuance ---------------------------------------------------------------

    def _issue(self, node: SimNode, demand: int) -> None:
        want = max(0, demand + node.backlog)
        next_id = node.generator.next_id
        append = node.ids.append
        issued = 0
        try:
            while issued < want:
                append(next_id())
                issued += 1
        except SimulationStall:
            self.blocked_ms += 1
        except GeneratorUnavailable as e:
            self._log(self.clock.now_millis() - self.start_ms, f"{node.name} unavailable ({e})")
            self._stop(node, self.clock.now_millis() - self.start_ms)
        node.backlog = want - issued

    # --- run --------------------------------------------------------------------

    def run(self) -> SimulationReport:
        s = self.scenario
        logger.info(
            "[SIMULATOR] %s: %d nodes, %d ms, demand %d/ms, seed %d",
            s.name, s.initial_nodes, s.duration_ms, s.ids_per_node_per_ms, s.seed,
        )
        schedule = self._schedule()
        for _ in range(s.initial_nodes):
            self.spawn(0)

        for t in range(s.duration_ms):
            self.clock.set(self.start_ms + t)
            self.pool.release_cooled(t)
            for event in schedule.get(t, ()):
                self._apply(t, event)
            for node in list(self.live.values()):
                self._issue(node, s.ids_per_node_per_ms)

        # events at the very end only change membership
        self.clock.set(self.start_ms + s.duration_ms)
        for event in schedule.get(s.duration_ms, ()):
            self._apply(s.duration_ms, event)

        return self._report()

    def _report(self) -> SimulationReport:
        s = self.scenario
        streams = [
            IssuanceStream(n.name, np.frombuffer(n.ids, dtype=np.uint64) if n.ids else [],
                           source_ip=n.ip, started_ms=n.started_ms)
            for n in self.nodes
        ]
        summary = audit_ids(streams, timestamp_shift=s.layout.timestamp_shift)
        digest = hashlib.sha256("\n".join(self.event_log).encode("utf-8")).hexdigest()

        report = SimulationReport(
            scenario=s.name,
            seed=s.seed,
            layout=s.layout.spec(),
            duration_ms=s.duration_ms,
            total_ids=summary.total_ids,
            distinct_ids=summary.distinct_ids,
            collision_count=summary.duplicate_count,
            per_node_monotonicity_violations=summary.monotonicity_violations,
            cross_incarnation_violations=summary.cross_incarnation_violations,
            blocked_milliseconds=self.blocked_ms,
            regressions_tolerated=self.tolerated,
            regressions_fatal=self.fatal,
            nodes_spawned=len(self.nodes),
            nodes_terminated=self.terminated,
            ip_reuses=self.pool.reuses,
            max_ids_per_node_ms=summary.max_ids_in_one_ms,
            event_log=tuple(self.event_log),
            event_log_digest=digest,
        )
        logger.info(
            "[SIMULATOR] %s: %d IDs, %d collisions, %d monotonicity violations",
            s.name, report.total_ids, report.collision_count,
            report.per_node_monotonicity_violations,
        )
        return report


def run_simulation(scenario: ChurnScenario) -> SimulationReport:
    return ChurnSimulator(scenario).run()


def regression_drill(scenario: ChurnScenario, offset_ms: int, warmup_ms: int = 5) -> DrillOutcome:
    """
    Standalone drill: one node issues for `warmup_ms`, then its clock steps
    back `offset_ms` and it tries again.
    """
    sim = ChurnSimulator(scenario)
    node = sim.spawn(0)
    for t in range(warmup_ms):
        sim.clock.set(sim.start_ms + t)
        sim._issue(node, max(1, scenario.ids_per_node_per_ms))
    return sim.regression_drill(node, offset_ms, warmup_ms - 1)
