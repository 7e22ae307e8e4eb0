"""
Monotonic ID generation state machine.

One Generator per process (or per simulated node). next_id runs under a lock:

1. Read the clock. If it is behind the last issuance time by at most the
   tolerance, sleep offset + 1 ms and read it once more; otherwise fail.
2. Same millisecond as last time: bump the sequence. On wrap to zero, block
   until the clock reaches the next millisecond.
3. New millisecond: sequence restarts at zero.

State is only committed once an identifier is actually produced, so a failed
or stalled call leaves the generator exactly as it was.
"""

import logging
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import List

from flakeless_app.core.bit_layout import STANDARD, BitLayout
from flakeless_app.core.clock import ClockSource
from flakeless_app.errors import (
    BatchTooLarge,
    ClockMovedBackwards,
    InvalidConfig,
    TimestampExhausted,
)

logger = logging.getLogger(__name__)

DEFAULT_EPOCH_MILLIS = 1_704_067_200_000  # 2024-01-01T00:00:00Z
DEFAULT_MAX_BACKWARD_MS = 10
DEFAULT_BATCH_CAP = 10_000


def parse_epoch(text: str) -> int:
    """ISO-8601 timestamp to Unix milliseconds. Naive values are taken as UTC."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        moment = datetime.fromisoformat(raw)
    except ValueError:
        raise InvalidConfig(f"epoch must be ISO-8601, got {text!r}") from None
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return int(moment.timestamp() * 1000)


def millis_to_iso(millis: int) -> str:
    moment = datetime.fromtimestamp(millis / 1000, tz=timezone.utc)
    return moment.isoformat(timespec="milliseconds").replace("+00:00", "Z")


@dataclass(frozen=True)
class GeneratorConfig:
    machine_id: int
    layout: BitLayout = STANDARD
    epoch_millis: int = DEFAULT_EPOCH_MILLIS
    region: int = 0
    max_backward_tolerance_ms: int = DEFAULT_MAX_BACKWARD_MS


@dataclass(frozen=True)
class GeneratorStats:
    ids_issued: int
    overflow_waits: int
    regression_waits: int
    last_time: int
    sequence: int

    def to_dict(self) -> dict:
        return {
            "ids_issued": self.ids_issued,
            "overflow_waits": self.overflow_waits,
            "regression_waits": self.regression_waits,
            "last_time": self.last_time,
            "sequence": self.sequence,
        }


class Generator:
    """
    Thread-safe Snowflake-style generator.

    Attributes:
        config: the immutable GeneratorConfig
        clock: the ClockSource readings come from
        batch_cap: largest count next_batch accepts
    """

    def __init__(
        self,
        config: GeneratorConfig,
        clock: ClockSource,
        batch_cap: int = DEFAULT_BATCH_CAP,
    ):
        layout = config.layout
        if not 0 <= config.machine_id <= layout.machine_mask:
            raise InvalidConfig(
                f"machine_id {config.machine_id} outside [0, {layout.machine_mask}]"
            )
        if not 0 <= config.region <= layout.region_mask:
            raise InvalidConfig(f"region {config.region} outside [0, {layout.region_mask}]")
        if config.epoch_millis < 0:
            raise InvalidConfig("epoch must not precede the Unix epoch")
        if config.max_backward_tolerance_ms < 0:
            raise InvalidConfig("max_backward_tolerance_ms must be >= 0")
        if batch_cap < 1:
            raise InvalidConfig("batch_cap must be >= 1")

        now = clock.now_millis()
        if config.epoch_millis > now:
            raise InvalidConfig(
                f"epoch {config.epoch_millis} is {config.epoch_millis - now} ms in the future"
            )

        self.config = config
        self.clock = clock
        self.batch_cap = batch_cap

        self._lock = threading.Lock()
        self._epoch = config.epoch_millis
        self._tolerance = config.max_backward_tolerance_ms
        self._sequence_mask = layout.sequence_mask
        self._timestamp_mask = layout.timestamp_mask
        self._timestamp_shift = layout.timestamp_shift
        self._node_bits = (config.region << layout.region_shift) | (
            config.machine_id << layout.machine_shift
        )

        self._last_time = 0
        self._sequence = 0
        self._ids_issued = 0
        self._overflow_waits = 0
        self._regression_waits = 0

    def next_id(self) -> int:
        with self._lock:
            return self._issue()

    def next_batch(self, count: int) -> List[int]:
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        if count > self.batch_cap:
            raise BatchTooLarge(count, self.batch_cap)
        with self._lock:
            return [self._issue() for _ in range(count)]

    def stats(self) -> GeneratorStats:
        with self._lock:
            return GeneratorStats(
                ids_issued=self._ids_issued,
                overflow_waits=self._overflow_waits,
                regression_waits=self._regression_waits,
                last_time=self._last_time,
                sequence=self._sequence,
            )

    def _issue(self) -> int:
        clock = self.clock
        last = self._last_time
        now = clock.now_millis()
        regressed = False
        overflowed = False

        if now < last:
            offset = last - now
            if offset > self._tolerance:
                logger.error("[GENERATOR] %s", ClockMovedBackwards(offset, self._tolerance))
                raise ClockMovedBackwards(offset, self._tolerance)
            logger.warning("[GENERATOR] clock moved back %d ms, waiting %d ms", offset, offset + 1)
            clock.sleep_millis(offset + 1)
            now = clock.now_millis()
            if now < last:
                # Still behind after the single wait: fail closed.
                raise ClockMovedBackwards(last - now, self._tolerance)
            regressed = True

        if now == last and self._ids_issued:
            sequence = (self._sequence + 1) & self._sequence_mask
            if sequence == 0:
                logger.debug("[GENERATOR] sequence exhausted at %d, blocking", now)
                now = clock.wait_until_after(last)
                overflowed = True
        else:
            sequence = 0

        offset_ms = now - self._epoch
        if offset_ms < 0:
            raise ClockMovedBackwards(self._epoch - now, self._tolerance)
        if offset_ms > self._timestamp_mask:
            raise TimestampExhausted(
                f"{offset_ms} ms since epoch exceeds the {self.config.layout.timestamp_bits}-bit timestamp"
            )

        self._last_time = now
        self._sequence = sequence
        self._ids_issued += 1
        self._overflow_waits += overflowed
        self._regression_waits += regressed
        return (offset_ms << self._timestamp_shift) | self._node_bits | sequence

    def __repr__(self) -> str:
        return (
            f"Generator(machine_id={self.config.machine_id}, "
            f"layout={self.config.layout.spec()}, clock={self.clock!r})"
        )


def new_generator(
    config: GeneratorConfig,
    clock: ClockSource,
    batch_cap: int = DEFAULT_BATCH_CAP,
) -> Generator:
    return Generator(config, clock, batch_cap=batch_cap)
