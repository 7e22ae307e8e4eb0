import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flakeless_app.core.bit_layout import PERFORMANCE, REGION, STANDARD, compose, decompose, IdParts
from flakeless_app.core.clock import VirtualClock
from flakeless_app.core.generator import (
    DEFAULT_EPOCH_MILLIS,
    Generator,
    GeneratorConfig,
    millis_to_iso,
    new_generator,
    parse_epoch,
)
from flakeless_app.errors import (
    BatchTooLarge,
    ClockMovedBackwards,
    InvalidConfig,
    SimulationStall,
    TimestampExhausted,
)

EPOCH = DEFAULT_EPOCH_MILLIS


def test_first_id_at_epoch_plus_one(make_generator):
    gen = make_generator()
    assert gen.next_id() == 4210816
    assert gen.next_id() == 4210817


def test_first_id_matches_compose(make_generator):
    gen = make_generator(machine_id=258)
    assert gen.next_id() == compose(STANDARD, IdParts(1, 0, 258, 0))


def test_new_millisecond_restarts_sequence(make_generator, clock):
    gen = make_generator()
    first = gen.next_id()
    gen.next_id()
    clock.advance(1)
    third = gen.next_id()
    assert decompose(STANDARD, third).sequence == 0
    assert decompose(STANDARD, third).timestamp_offset == 2
    assert third > first


def test_sequence_overflow_blocks_until_next_millisecond():
    clock = VirtualClock(start=EPOCH + 1, auto_advance=True)
    gen = Generator(GeneratorConfig(machine_id=7), clock)
    ids = [gen.next_id() for _ in range(65)]
    parts = [decompose(STANDARD, i) for i in ids]

    assert [p.timestamp_offset for p in parts[:64]] == [1] * 64
    assert [p.sequence for p in parts[:64]] == list(range(64))
    assert parts[64].timestamp_offset == 2
    assert parts[64].sequence == 0
    assert gen.stats().overflow_waits == 1


def test_overflow_on_frozen_clock_leaves_state_untouched(make_generator):
    gen = make_generator()
    for _ in range(64):
        gen.next_id()
    before = gen.stats()
    with pytest.raises(SimulationStall):
        gen.next_id()
    assert gen.stats() == before


def test_performance_layout_gives_128_per_millisecond():
    clock = VirtualClock(start=EPOCH + 1, auto_advance=True)
    gen = Generator(GeneratorConfig(machine_id=1, layout=PERFORMANCE), clock)
    ids = [gen.next_id() for _ in range(129)]
    assert decompose(PERFORMANCE, ids[127]).sequence == 127
    assert decompose(PERFORMANCE, ids[128]).timestamp_offset == 2


def test_region_bit_is_carried(clock):
    gen = Generator(GeneratorConfig(machine_id=3, layout=REGION, region=1), clock)
    parts = decompose(REGION, gen.next_id())
    assert (parts.region, parts.machine_id) == (1, 3)


def test_regression_of_exactly_tolerance_waits_then_succeeds(make_generator, clock):
    gen = make_generator()
    clock.advance(20)
    before = gen.next_id()
    clock.regress(10)
    after = gen.next_id()
    assert after > before
    assert gen.stats().regression_waits == 1


def test_regression_beyond_tolerance_fails(make_generator, clock):
    gen = make_generator()
    clock.advance(20)
    gen.next_id()
    snapshot = gen.stats()
    clock.regress(11)
    with pytest.raises(ClockMovedBackwards) as info:
        gen.next_id()
    assert info.value.offset_ms == 11
    assert info.value.reason == "clock_moved_backwards"
    assert gen.stats() == snapshot


def test_regression_within_tolerance_keeps_monotonicity(make_generator, clock):
    gen = make_generator()
    clock.advance(50)
    previous = gen.next_id()
    clock.regress(3)
    assert gen.next_id() > previous


def test_configurable_tolerance(clock):
    gen = Generator(GeneratorConfig(machine_id=1, max_backward_tolerance_ms=0), clock)
    clock.advance(5)
    gen.next_id()
    clock.regress(1)
    with pytest.raises(ClockMovedBackwards):
        gen.next_id()


def test_timestamp_exhausted():
    layout_max = STANDARD.timestamp_mask
    clock = VirtualClock(start=layout_max + 1)
    gen = Generator(GeneratorConfig(machine_id=1, epoch_millis=0), clock)
    with pytest.raises(TimestampExhausted):
        gen.next_id()


def test_invalid_configs(clock):
    with pytest.raises(InvalidConfig):
        Generator(GeneratorConfig(machine_id=1 << 16), clock)
    with pytest.raises(InvalidConfig):
        Generator(GeneratorConfig(machine_id=-1), clock)
    with pytest.raises(InvalidConfig):
        Generator(GeneratorConfig(machine_id=1, region=1), clock)
    with pytest.raises(InvalidConfig):
        Generator(GeneratorConfig(machine_id=1, epoch_millis=EPOCH + 10), clock)
    with pytest.raises(InvalidConfig):
        Generator(GeneratorConfig(machine_id=1, max_backward_tolerance_ms=-1), clock)
    with pytest.raises(InvalidConfig):
        Generator(GeneratorConfig(machine_id=1), clock, batch_cap=0)


def test_batch_is_strictly_increasing(make_generator, clock):
    clock.auto_advance = True
    gen = make_generator()
    batch = gen.next_batch(500)
    assert len(batch) == 500
    assert all(a < b for a, b in zip(batch, batch[1:]))


def test_batch_bounds(make_generator):
    gen = make_generator(batch_cap=10)
    with pytest.raises(ValueError):
        gen.next_batch(0)
    with pytest.raises(BatchTooLarge):
        gen.next_batch(11)


def test_stats_counts_issued_ids(make_generator):
    gen = make_generator()
    assert gen.stats().ids_issued == 0
    for _ in range(10):
        gen.next_id()
    stats = gen.stats()
    assert stats.ids_issued == 10
    assert stats.to_dict()["sequence"] == 9


def test_threads_share_one_sequence_space():
    clock = VirtualClock(start=EPOCH + 1, auto_advance=True)
    gen = new_generator(GeneratorConfig(machine_id=9), clock)
    results = [[] for _ in range(8)]

    def work(sink):
        for _ in range(1000):
            sink.append(gen.next_id())

    threads = [threading.Thread(target=work, args=(sink,)) for sink in results]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    every = [i for sink in results for i in sink]
    assert len(set(every)) == 8000
    for sink in results:
        assert all(a < b for a, b in zip(sink, sink[1:]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["advance", "regress", "issue"]), st.integers(0, 10)),
                max_size=200))
def test_scripted_clock_never_breaks_monotonicity(script):
    clock = VirtualClock(start=EPOCH + 100, auto_advance=True)
    gen = Generator(GeneratorConfig(machine_id=5), clock)
    issued = []
    for action, amount in script:
        if action == "advance":
            clock.advance(amount)
        elif action == "regress":
            clock.regress(amount)
        else:
            try:
                issued.append(gen.next_id())
            except ClockMovedBackwards:
                pass
    assert all(a < b for a, b in zip(issued, issued[1:]))
    assert len(set(issued)) == len(issued)


def test_epoch_parsing():
    assert parse_epoch("2024-01-01T00:00:00Z") == EPOCH
    assert parse_epoch("2024-01-01T00:00:00") == EPOCH
    assert parse_epoch("2024-01-01T01:00:00+01:00") == EPOCH
    assert millis_to_iso(EPOCH) == "2024-01-01T00:00:00.000Z"
    with pytest.raises(InvalidConfig):
        parse_epoch("yesterday")
