import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flakeless_app.core.bit_layout import PERFORMANCE, STANDARD, IdParts, compose
from flakeless_app.errors import CapacityExhausted, ScenarioInvalid
from flakeless_app.simulation import (
    ChurnScenario,
    DrillOutcome,
    EventKind,
    IpPool,
    IssuanceStream,
    audit_ids,
    bundled_scenarios,
    load_scenario,
    parse_scenario,
    regression_drill,
    run_simulation,
    with_overrides,
)


# --- scenario files -------------------------------------------------------------

def test_parse_scenario_directives():
    scenario = parse_scenario(
        """
        # comment line
        seed 42
        subnet 10.1.0.0/24
        duration 500      # trailing comment
        nodes 3
        demand 16
        cooldown 2
        layout performance
        tolerance 5
        allow_duplicate_ip no
        restart_lag 4
        churn 25
        jitter 3 4
        at 5 spawn
        at 7 terminate node-0
        at 9 regress_clock node-1 3
        """,
        name="custom",
    )
    assert scenario.name == "custom"
    assert (scenario.seed, scenario.subnet, scenario.duration_ms) == (42, "10.1.0.0/24", 500)
    assert (scenario.initial_nodes, scenario.ids_per_node_per_ms) == (3, 16)
    assert scenario.layout == PERFORMANCE
    assert scenario.max_backward_tolerance_ms == 5
    assert scenario.allow_concurrent_duplicate_ip is False
    assert (scenario.restart_lag_ms, scenario.churn_interval_ms) == (4, 25)
    assert (scenario.jitter_count, scenario.jitter_max_offset_ms) == (3, 4)

    kinds = [(e.at_ms, e.kind, e.node, e.offset_ms) for e in scenario.churn_events]
    assert kinds == [
        (5, EventKind.SPAWN, None, 0),
        (7, EventKind.TERMINATE, "node-0", 0),
        (9, EventKind.REGRESS_CLOCK, "node-1", 3),
    ]


@pytest.mark.parametrize("text, line", [
    ("nodes many", 1),
    ("seed 1\n\nbogus 3", 3),
    ("seed 1\nat 5 explode", 2),
    ("at 5 terminate", 1),
    ("at 5 regress_clock node-0", 1),
    ("duration 10\nat 11 spawn", 2),
    ("layout 41:1:16:6", 1),
    ("allow_duplicate_ip maybe", 1),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ScenarioInvalid) as info:
        parse_scenario(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


@pytest.mark.parametrize("text", ["subnet 10.0.0.0/15", "subnet fd00::/120", "subnet nonsense",
                                  "duration 0", "restart_lag 1000", "jitter 3 0"])
def test_invalid_scenario_values(text):
    with pytest.raises(ScenarioInvalid):
        parse_scenario(text)


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    for name in ("churn_basic", "churn_acceptance", "bad_ip_reuse", "restart_lag",
                 "regression_drill", "overload"):
        assert name in names
        assert load_scenario(name).name == name


def test_load_scenario_from_path(tmp_path):
    path = tmp_path / "mine.scenario"
    path.write_text("nodes 2\nduration 10\n")
    scenario = load_scenario(path)
    assert (scenario.name, scenario.initial_nodes) == ("mine", 2)
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.scenario")


def test_with_overrides_revalidates():
    scenario = ChurnScenario(duration_ms=10)
    assert with_overrides(scenario, seed=9).seed == 9
    with pytest.raises(ScenarioInvalid):
        with_overrides(scenario, duration_ms=0)


# --- IP pool --------------------------------------------------------------------

def test_pool_hands_out_lowest_free_address_after_cooldown():
    pool = IpPool("10.0.0.0/29", cooldown_ms=2)
    assert pool.capacity == 6
    assert [pool.allocate(0) for _ in range(3)] == ["10.0.0.1", "10.0.0.2", "10.0.0.3"]

    pool.release("10.0.0.1", 5)
    assert pool.allocate(5) == "10.0.0.4"
    assert pool.allocate(6) == "10.0.0.5"
    assert pool.reuses == 0
    assert pool.allocate(7) == "10.0.0.1"
    assert pool.reuses == 1


def test_pool_exhaustion():
    pool = IpPool("10.0.0.0/30")
    pool.allocate(0)
    pool.allocate(0)
    with pytest.raises(CapacityExhausted):
        pool.allocate(0)


def test_pool_duplicates_share_an_address():
    pool = IpPool("10.0.0.0/24")
    first = pool.allocate(0)
    pool.allocate(0)
    assert pool.allocate_duplicate() == first
    pool.release(first, 1)
    assert pool.in_use == 2
    pool.release(first, 1)
    assert pool.in_use == 1
    with pytest.raises(ValueError):
        pool.release(first, 2)


# --- audit ----------------------------------------------------------------------

def test_audit_clean_stream():
    summary = audit_ids([IssuanceStream("a", [1, 2, 3])])
    assert summary.clean
    assert (summary.total_ids, summary.distinct_ids) == (3, 3)


def test_audit_counts_monotonicity_violation():
    summary = audit_ids([IssuanceStream("a", [1, 3, 2])])
    assert summary.monotonicity_violations == 1
    assert summary.duplicate_count == 0


def test_audit_counts_shared_value_once():
    summary = audit_ids([IssuanceStream("a", [5, 7]), IssuanceStream("b", [7, 9])])
    assert summary.duplicate_count == 1
    assert summary.distinct_ids == 3
    assert not summary.clean


def test_audit_cross_incarnation():
    ip = "10.0.0.1"
    overlapping = [IssuanceStream("a", [10, 20], ip, 0), IssuanceStream("b", [15, 30], ip, 5)]
    assert audit_ids(overlapping).cross_incarnation_violations == 1
    ordered = [IssuanceStream("a", [10, 20], ip, 0), IssuanceStream("b", [21, 30], ip, 5)]
    assert audit_ids(ordered).cross_incarnation_violations == 0


def test_audit_busiest_millisecond():
    ids = [compose(STANDARD, IdParts(1, 0, 4, 0)), compose(STANDARD, IdParts(1, 0, 4, 1)),
           compose(STANDARD, IdParts(2, 0, 4, 0))]
    assert audit_ids([IssuanceStream("a", ids)]).max_ids_in_one_ms == 2


# --- simulation -----------------------------------------------------------------

def test_churn_basic_is_clean():
    report = run_simulation(load_scenario("churn_basic"))
    assert report.violations == 0
    assert report.total_ids == 20 * 64 * 200
    assert report.distinct_ids == report.total_ids
    assert report.nodes_spawned == 39
    assert report.nodes_terminated == 19
    assert report.ip_reuses == 18
    assert report.max_ids_per_node_ms == 64


def test_hundred_nodes_for_a_second_without_collisions():
    scenario = ChurnScenario(name="hundred", seed=1, subnet="10.0.0.0/16", duration_ms=1000,
                             initial_nodes=100, ids_per_node_per_ms=64)
    report = run_simulation(scenario)
    assert report.total_ids == 6_400_000
    assert report.collision_count == 0
    assert report.per_node_monotonicity_violations == 0


def test_acceptance_churn_scenario():
    report = run_simulation(load_scenario("churn_acceptance"))
    assert report.nodes_spawned - 100 + report.nodes_terminated == 1998
    assert report.total_ids == 6_400_000
    assert report.violations == 0
    assert report.regressions_tolerated == 50
    assert report.regressions_fatal == 0
    assert report.ip_reuses > 0


def test_duplicate_ip_reports_collisions():
    report = run_simulation(load_scenario("bad_ip_reuse"))
    assert report.collision_count == 8 * 40
    assert report.violations > 0


def test_restart_lag_reports_violations():
    report = run_simulation(load_scenario("restart_lag"))
    assert report.cross_incarnation_violations > 0
    assert report.collision_count > 0


def test_scheduled_regression_drills():
    report = run_simulation(load_scenario("regression_drill"))
    assert (report.regressions_tolerated, report.regressions_fatal) == (2, 1)
    assert report.violations == 0
    assert report.total_ids == 2 * 60 * 4 + 30 * 4
    assert any("regress_clock node-2 offset=11 fatal" in line for line in report.event_log)


@pytest.mark.parametrize("offset, outcome", [
    (5, DrillOutcome.TOLERATED),
    (10, DrillOutcome.TOLERATED),
    (11, DrillOutcome.FATAL),
])
def test_standalone_regression_drill(offset, outcome):
    scenario = ChurnScenario(subnet="10.0.0.0/24", duration_ms=100)
    assert regression_drill(scenario, offset) is outcome


def test_zero_tolerance_drill_is_fatal():
    scenario = ChurnScenario(subnet="10.0.0.0/24", duration_ms=100, max_backward_tolerance_ms=0)
    assert regression_drill(scenario, 1) is DrillOutcome.FATAL


def test_overload_blocks_without_exceeding_sequence_space():
    report = run_simulation(load_scenario("overload"))
    assert report.blocked_milliseconds == 4 * 100
    assert report.max_ids_per_node_ms == 64
    assert report.total_ids == 4 * 64 * 100
    assert report.violations == 0


def test_capacity_exhausted():
    with pytest.raises(CapacityExhausted):
        run_simulation(ChurnScenario(subnet="10.0.0.0/30", initial_nodes=3, duration_ms=5))


def test_same_seed_same_report():
    scenario = load_scenario("churn_basic")
    first, second = run_simulation(scenario), run_simulation(scenario)
    assert first.to_dict() == second.to_dict()
    assert first.event_log == second.event_log

    reseeded = run_simulation(with_overrides(scenario, seed=8))
    assert reseeded.event_log_digest != first.event_log_digest


def test_report_renderings():
    report = run_simulation(load_scenario("regression_drill"))
    text = report.render_text(show_events=True)
    assert text.splitlines()[len(report.to_dict()) + 1].endswith("OK")
    assert "t=30 regress_clock node-2 offset=11 fatal" in text

    ndjson = report.render_ndjson(show_events=True).splitlines()
    assert len(ndjson) == len(report.event_log) + 1
    assert '"type": "simulation_report"' in ndjson[-1]


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    nodes=st.integers(1, 8),
    duration=st.integers(10, 60),
    demand=st.integers(0, 80),
    churn=st.integers(0, 7),
    cooldown=st.integers(0, 3),
    jitter=st.integers(0, 5),
    jitter_max=st.integers(1, 10),
)
def test_default_assumptions_never_collide(seed, nodes, duration, demand, churn, cooldown,
                                           jitter, jitter_max):
    scenario = ChurnScenario(
        seed=seed, subnet="10.0.0.0/24", duration_ms=duration, initial_nodes=nodes,
        ids_per_node_per_ms=demand, churn_interval_ms=churn, ip_reuse_cooldown_ms=cooldown,
        jitter_count=jitter, jitter_max_offset_ms=jitter_max,
    )
    report = run_simulation(scenario)
    assert report.violations == 0
    assert report.regressions_fatal == 0
    assert report.max_ids_per_node_ms <= 64
