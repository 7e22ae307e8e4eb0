"""
Deterministic IP allocation for the simulator.

Always hands out the lowest free host address. Released addresses sit in a
cooldown queue before they become free again, which models how orchestrators
recycle pod IPs.
"""

import heapq
import ipaddress
from collections import Counter, deque
from typing import Deque, List, Tuple

from flakeless_app.errors import CapacityExhausted


class IpPool:
    def __init__(self, cidr: str, cooldown_ms: int = 0):
        network = ipaddress.ip_network(cidr, strict=False)
        self.network = network
        self.cooldown_ms = cooldown_ms
        self._hosts: List[int] = [int(a) for a in network.hosts()] or [int(network.network_address)]
        self._next_fresh = 0
        self._free: List[int] = []  # heap of host indices
        self._cooling: Deque[Tuple[int, int]] = deque()  # (ready_at_ms, index)
        self._in_use: Counter = Counter()
        self.reuses = 0

    @property
    def capacity(self) -> int:
        return len(self._hosts)

    @property
    def in_use(self) -> int:
        return len(self._in_use)

    def release_cooled(self, now_ms: int) -> None:
        while self._cooling and self._cooling[0][0] <= now_ms:
            _, index = self._cooling.popleft()
            heapq.heappush(self._free, index)

    def allocate(self, now_ms: int) -> str:
        self.release_cooled(now_ms)
        if self._free:
            index = heapq.heappop(self._free)
            self.reuses += 1
        elif self._next_fresh < len(self._hosts):
            index = self._next_fresh
            self._next_fresh += 1
        else:
            raise CapacityExhausted(
                f"{self.network} has no free address at t={now_ms} "
                f"({self.in_use} in use, {len(self._cooling)} cooling)"
            )
        self._in_use[index] += 1
        return self._address(index)

    def allocate_duplicate(self) -> str:
        """Hand out the lowest address that is already live (duplicate-IP mode)."""
        if not self._in_use:
            raise CapacityExhausted("no live address to duplicate")
        index = min(self._in_use)
        self._in_use[index] += 1
        return self._address(index)

    def release(self, ip: str, now_ms: int) -> None:
        index = self._index(ip)
        self._in_use[index] -= 1
        if self._in_use[index] > 0:
            return
        del self._in_use[index]
        self._cooling.append((now_ms + self.cooldown_ms, index))

    def _address(self, index: int) -> str:
        return str(ipaddress.IPv4Address(self._hosts[index]))

    def _index(self, ip: str) -> int:
        # hosts are contiguous, so the index is an offset from the first one
        index = int(ipaddress.IPv4Address(ip)) - self._hosts[0]
        if not 0 <= index < len(self._hosts) or index not in self._in_use:
            raise ValueError(f"{ip} is not allocated from {self.network}")
        return index
