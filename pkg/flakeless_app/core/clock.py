"""
Millisecond time sources.

The generator and the simulator only talk to a ClockSource. WallClock reads
the system clock; VirtualClock is set and advanced by hand so tests and
simulations are deterministic.
"""

import logging
import os
import threading
import time
from abc import ABC, abstractmethod
from typing import Optional

from flakeless_app.errors import SimulationStall

logger = logging.getLogger(__name__)

_yield = getattr(os, "sched_yield", lambda: time.sleep(0))


class ClockSource(ABC):
    """Unix-epoch milliseconds."""

    @abstractmethod
    def now_millis(self) -> int:
        """Current reading of the source."""

    @abstractmethod
    def wait_until_after(self, last: int) -> int:
        """Block until the reading is strictly greater than `last` and return it."""

    @abstractmethod
    def sleep_millis(self, millis: int) -> None:
        """Let `millis` of this clock's time pass."""


class WallClock(ClockSource):
    def now_millis(self) -> int:
        return time.time_ns() // 1_000_000

    def wait_until_after(self, last: int) -> int:
        # Spin instead of sleeping: a sleep can overshoot the next millisecond.
        now = self.now_millis()
        while now <= last:
            _yield()
            now = self.now_millis()
        return now

    def sleep_millis(self, millis: int) -> None:
        time.sleep(millis / 1000)

    def __repr__(self) -> str:
        return "WallClock()"


class VirtualClock(ClockSource):
    """
    A clock that only moves when told to.

    Args:
        start: initial reading in milliseconds
        auto_advance: when True, wait_until_after moves the clock to last + 1
            itself instead of waiting for another thread
        limit: with auto_advance, readings at or beyond `limit` are never
            reached automatically; waiting for one raises SimulationStall
        stall_timeout: seconds wait_until_after will wait for another thread
            to advance the clock before raising SimulationStall
    """

    def __init__(
        self,
        start: int = 0,
        auto_advance: bool = False,
        limit: Optional[int] = None,
        stall_timeout: float = 0.0,
    ):
        if start < 0:
            raise ValueError("VirtualClock cannot start before the Unix epoch")
        self._now = start
        self.auto_advance = auto_advance
        self.limit = limit
        self.stall_timeout = stall_timeout
        self._cond = threading.Condition()

    def now_millis(self) -> int:
        with self._cond:
            return self._now

    def set(self, millis: int) -> None:
        if millis < 0:
            raise ValueError("VirtualClock cannot be set before the Unix epoch")
        with self._cond:
            self._now = millis
            self._cond.notify_all()

    def advance(self, delta: int = 1) -> int:
        if delta < 0:
            raise ValueError("use regress() to move a VirtualClock backwards")
        with self._cond:
            self._now += delta
            self._cond.notify_all()
            return self._now

    def regress(self, delta: int) -> int:
        """Inject a backwards jump, as an NTP step would."""
        with self._cond:
            if delta < 0 or delta > self._now:
                raise ValueError(f"cannot regress by {delta} from {self._now}")
            self._now -= delta
            logger.debug("[CLOCK] virtual clock regressed by %d ms to %d", delta, self._now)
            return self._now

    def wait_until_after(self, last: int) -> int:
        with self._cond:
            if self._now > last:
                return self._now

            if self.auto_advance:
                target = last + 1
                if self.limit is not None and target >= self.limit:
                    raise SimulationStall(f"virtual clock limit {self.limit} reached")
                self._now = target
                self._cond.notify_all()
                return self._now

            if self.stall_timeout > 0 and self._cond.wait_for(
                lambda: self._now > last, timeout=self.stall_timeout
            ):
                return self._now

            raise SimulationStall(
                f"virtual clock frozen at {self._now}, waiting for a reading after {last}"
            )

    def sleep_millis(self, millis: int) -> None:
        self.advance(millis)

    def __repr__(self) -> str:
        return f"VirtualClock(now={self._now})"


def now_millis(clock: ClockSource) -> int:
    return clock.now_millis()


def wait_until_after(clock: ClockSource, last: int) -> int:
    return clock.wait_until_after(last)
