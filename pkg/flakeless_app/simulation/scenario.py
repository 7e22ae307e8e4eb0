"""
Churn scenario description and its line-oriented file format.

One directive per line, `#` starts a comment:

    seed 42                   # PCG64 seed (numpy.random.default_rng)
    subnet 10.0.0.0/16        # IPv4, /16 or smaller
    duration 1000             # simulated milliseconds
    nodes 100                 # nodes alive at t=0
    demand 64                 # IDs each node wants per millisecond
    cooldown 1                # ms before a released IP can be handed out again
    layout standard           # preset name or t:r:m:s
    tolerance 10              # max tolerated clock regression, ms
    allow_duplicate_ip false  # true: spawns share the lowest live address
    restart_lag 0             # new incarnations start this many ms behind
    churn 10                  # every 10 ms: terminate a random node, spawn one
    jitter 20 10              # 20 random regressions of 1..10 ms
    at 15 spawn
    at 20 terminate node-3    # node name or "random"
    at 30 regress_clock node-5 11
"""

from dataclasses import dataclass, replace
from enum import Enum
import ipaddress
from pathlib import Path
from typing import List, Optional, Tuple, Union

from flakeless_app.core.bit_layout import STANDARD, BitLayout, parse_layout_spec
from flakeless_app.errors import InvalidLayout, ScenarioInvalid

# Simulated time starts this far after the generator epoch so lagging clocks
# never read before it.
SIM_START_OFFSET_MS = 1_000

BUNDLED_DIR = Path(__file__).resolve().parent / "scenarios"


class EventKind(str, Enum):
    SPAWN = "spawn"
    TERMINATE = "terminate"
    REGRESS_CLOCK = "regress_clock"


RANDOM_NODE = "random"


@dataclass(frozen=True)
class ChurnEvent:
    at_ms: int
    kind: EventKind
    node: Optional[str] = None
    offset_ms: int = 0
    line: Optional[int] = None


@dataclass(frozen=True)
class ChurnScenario:
    name: str = "scenario"
    seed: int = 0
    subnet: str = "10.0.0.0/16"
    duration_ms: int = 1000
    initial_nodes: int = 1
    churn_events: Tuple[ChurnEvent, ...] = ()
    ip_reuse_cooldown_ms: int = 1
    allow_concurrent_duplicate_ip: bool = False
    ids_per_node_per_ms: int = 1
    layout: BitLayout = STANDARD
    max_backward_tolerance_ms: int = 10
    churn_interval_ms: int = 0
    jitter_count: int = 0
    jitter_max_offset_ms: int = 0
    restart_lag_ms: int = 0

    def validate(self) -> None:
        try:
            network = ipaddress.ip_network(self.subnet, strict=False)
        except ValueError as e:
            raise ScenarioInvalid(f"subnet {self.subnet!r}: {e}") from None
        if network.version != 4:
            raise ScenarioInvalid(f"subnet {self.subnet!r} is not IPv4")
        if network.prefixlen < 16:
            raise ScenarioInvalid(f"subnet {self.subnet!r} is larger than a /16")

        checks = [
            (self.seed >= 0, "seed must be >= 0"),
            (self.duration_ms >= 1, "duration must be >= 1"),
            (self.initial_nodes >= 0, "nodes must be >= 0"),
            (self.ids_per_node_per_ms >= 0, "demand must be >= 0"),
            (self.ip_reuse_cooldown_ms >= 0, "cooldown must be >= 0"),
            (self.max_backward_tolerance_ms >= 0, "tolerance must be >= 0"),
            (self.churn_interval_ms >= 0, "churn interval must be >= 0"),
            (self.jitter_count >= 0, "jitter count must be >= 0"),
            (self.jitter_count == 0 or self.jitter_max_offset_ms >= 1,
             "jitter max offset must be >= 1"),
            (0 <= self.restart_lag_ms < SIM_START_OFFSET_MS,
             f"restart_lag must be in [0, {SIM_START_OFFSET_MS})"),
            (self.jitter_max_offset_ms < SIM_START_OFFSET_MS,
             f"jitter max offset must be < {SIM_START_OFFSET_MS}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ScenarioInvalid(message)

        for event in self.churn_events:
            if not 0 <= event.at_ms <= self.duration_ms:
                raise ScenarioInvalid(
                    f"event at {event.at_ms} ms outside [0, {self.duration_ms}]", event.line
                )
            if event.kind is EventKind.REGRESS_CLOCK and not 0 <= event.offset_ms < SIM_START_OFFSET_MS:
                raise ScenarioInvalid(
                    f"regression offset must be in [0, {SIM_START_OFFSET_MS})", event.line
                )


_INT_DIRECTIVES = {
    "seed": "seed",
    "duration": "duration_ms",
    "nodes": "initial_nodes",
    "demand": "ids_per_node_per_ms",
    "cooldown": "ip_reuse_cooldown_ms",
    "tolerance": "max_backward_tolerance_ms",
    "churn": "churn_interval_ms",
    "restart_lag": "restart_lag_ms",
}
_BOOLS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _int(token: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ScenarioInvalid(f"expected an integer, got {token!r}", line) from None


def _parse_event(args: List[str], line: int) -> ChurnEvent:
    if len(args) < 2:
        raise ScenarioInvalid("usage: at <ms> spawn | terminate <node> | regress_clock <node> <ms>", line)
    at_ms = _int(args[0], line)
    try:
        kind = EventKind(args[1])
    except ValueError:
        raise ScenarioInvalid(f"unknown event kind {args[1]!r}", line) from None

    rest = args[2:]
    if kind is EventKind.SPAWN:
        if rest:
            raise ScenarioInvalid("spawn takes no arguments", line)
        return ChurnEvent(at_ms, kind, line=line)
    if kind is EventKind.TERMINATE:
        if len(rest) != 1:
            raise ScenarioInvalid("terminate takes one node name or 'random'", line)
        return ChurnEvent(at_ms, kind, node=rest[0], line=line)
    if len(rest) != 2:
        raise ScenarioInvalid("regress_clock takes a node name and an offset in ms", line)
    return ChurnEvent(at_ms, kind, node=rest[0], offset_ms=_int(rest[1], line), line=line)


def parse_scenario(text: str, name: str = "scenario") -> ChurnScenario:
    values = {"name": name}
    events: List[ChurnEvent] = []

    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        directive, args = tokens[0].lower(), tokens[1:]

        if directive in _INT_DIRECTIVES:
            if len(args) != 1:
                raise ScenarioInvalid(f"{directive} takes exactly one value", number)
            values[_INT_DIRECTIVES[directive]] = _int(args[0], number)
        elif directive == "subnet":
            if len(args) != 1:
                raise ScenarioInvalid("subnet takes one CIDR block", number)
            values["subnet"] = args[0]
        elif directive == "layout":
            if len(args) != 1:
                raise ScenarioInvalid("layout takes one preset name or t:r:m:s", number)
            try:
                values["layout"] = parse_layout_spec(args[0])
            except InvalidLayout as e:
                raise ScenarioInvalid(str(e), number) from None
        elif directive == "allow_duplicate_ip":
            if len(args) != 1 or args[0].lower() not in _BOOLS:
                raise ScenarioInvalid("allow_duplicate_ip takes true or false", number)
            values["allow_concurrent_duplicate_ip"] = _BOOLS[args[0].lower()]
        elif directive == "jitter":
            if len(args) != 2:
                raise ScenarioInvalid("jitter takes <count> <max_offset_ms>", number)
            values["jitter_count"] = _int(args[0], number)
            values["jitter_max_offset_ms"] = _int(args[1], number)
        elif directive == "at":
            events.append(_parse_event(args, number))
        else:
            raise ScenarioInvalid(f"unknown directive {directive!r}", number)

    scenario = ChurnScenario(**values, churn_events=tuple(events))
    scenario.validate()
    return scenario


def bundled_scenarios() -> List[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.scenario"))


def load_scenario(source: Union[str, Path]) -> ChurnScenario:
    """Load a scenario file, or a bundled scenario by name (e.g. "churn_basic")."""
    path = Path(source)
    if not path.is_file():
        bundled = BUNDLED_DIR / f"{source}.scenario"
        if not bundled.is_file():
            raise FileNotFoundError(
                f"no scenario file {str(source)!r} and no bundled scenario of that name "
                f"(bundled: {', '.join(bundled_scenarios())})"
            )
        path = bundled
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def with_overrides(scenario: ChurnScenario, **changes) -> ChurnScenario:
    updated = replace(scenario, **changes)
    updated.validate()
    return updated
