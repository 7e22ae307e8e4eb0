"""
Deterministic churn simulation and the ID auditor.
"""

from .audit import AuditSummary, IssuanceStream, audit_ids
from .ip_pool import IpPool
from .scenario import (
    ChurnEvent,
    ChurnScenario,
    EventKind,
    bundled_scenarios,
    load_scenario,
    parse_scenario,
    with_overrides,
)
from .simulator import (
    ChurnSimulator,
    DrillOutcome,
    SimulationReport,
    regression_drill,
    run_simulation,
)

__all__ = [
    "ChurnEvent",
    "ChurnScenario",
    "EventKind",
    "parse_scenario",
    "load_scenario",
    "bundled_scenarios",
    "with_overrides",
    "IpPool",
    "IssuanceStream",
    "AuditSummary",
    "audit_ids",
    "ChurnSimulator",
    "DrillOutcome",
    "SimulationReport",
    "run_simulation",
    "regression_drill",
]
