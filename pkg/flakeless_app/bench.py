"""
Throughput harness.

virtual: T threads share one generator on an auto-advancing VirtualClock that
         stops at start + D seconds. The count is exact: D * 2^seq * 1000.
wall:    T threads share one generator on the system clock for D seconds.
         TPS is computed over the millisecond span the IDs themselves cover,
         so it can be compared directly with the per-node ceiling.
http:    C clients drive a running service with N total GET /id requests.
"""

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
import requests

from flakeless_app.core.bit_layout import (
    MEASURED_MICROBENCH_TPS,
    STANDARD,
    BitLayout,
    max_ids_per_second,
)
from flakeless_app.core.clock import VirtualClock, WallClock
from flakeless_app.core.generator import DEFAULT_EPOCH_MILLIS, Generator, GeneratorConfig
from flakeless_app.errors import SimulationStall

logger = logging.getLogger(__name__)

BENCH_MODES = ("virtual", "wall")


@dataclass(frozen=True)
class BenchReport:
    mode: str
    layout: str
    threads: int
    duration_seconds: float
    total_ids: int
    distinct_ids: int
    duplicates: int
    tps: float
    ceiling_tps: int
    utilization_pct: float
    within_ceiling: bool
    reference_tps: int = MEASURED_MICROBENCH_TPS
    wall_seconds: Optional[float] = None

    def to_dict(self) -> dict:
        data = asdict(self)
        if self.wall_seconds is None:
            data.pop("wall_seconds")
        return data

    def render_text(self) -> str:
        data = self.to_dict()
        width = max(len(k) for k in data)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in data.items())

    def render_ndjson(self) -> str:
        return json.dumps({"type": "bench_report", **self.to_dict()}, sort_keys=True)


@dataclass(frozen=True)
class HttpLoadReport:
    url: str
    clients: int
    requests: int
    ok: int
    server_errors: int
    failed_requests: int
    distinct_ids: int
    monotonic_clients: int
    tps: float
    avg_latency_ms: float
    p99_latency_ms: float
    elapsed_seconds: float

    def to_dict(self) -> dict:
        return asdict(self)

    def render_text(self) -> str:
        data = self.to_dict()
        width = max(len(k) for k in data)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in data.items())

    def render_ndjson(self) -> str:
        return json.dumps({"type": "http_load_report", **self.to_dict()}, sort_keys=True)


def _drain(generator: Generator, sink: List[int]) -> None:
    append = sink.append
    next_id = generator.next_id
    try:
        while True:
            append(next_id())
    except SimulationStall:
        pass


def _until(generator: Generator, deadline: float, sink: List[int]) -> None:
    append = sink.append
    next_id = generator.next_id
    while time.monotonic() < deadline:
        append(next_id())


def run_benchmark(
    threads: int,
    duration_seconds: float,
    mode: str = "virtual",
    layout: BitLayout = STANDARD,
    machine_id: int = 1,
    epoch_millis: int = DEFAULT_EPOCH_MILLIS,
) -> BenchReport:
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if duration_seconds <= 0:
        raise ValueError("duration must be > 0")
    if mode not in BENCH_MODES:
        raise ValueError(f"mode must be one of {', '.join(BENCH_MODES)}")

    config = GeneratorConfig(machine_id=machine_id, layout=layout, epoch_millis=epoch_millis)
    if mode == "virtual":
        start = epoch_millis + 1
        span_ms = int(round(duration_seconds * 1000))
        clock = VirtualClock(start=start, auto_advance=True, limit=start + span_ms)
    else:
        clock = WallClock()
    generator = Generator(config, clock)

    sinks: List[List[int]] = [[] for _ in range(threads)]
    logger.info("[BENCH] %s mode, %d threads, %.1fs, layout %s",
                mode, threads, duration_seconds, layout.spec())

    began = time.perf_counter()
    if mode == "virtual":
        workers = [threading.Thread(target=_drain, args=(generator, sink)) for sink in sinks]
    else:
        deadline = time.monotonic() + duration_seconds
        workers = [threading.Thread(target=_until, args=(generator, deadline, sink)) for sink in sinks]
    for worker in workers:
        worker.start()
    for worker in workers:
        worker.join()
    wall_seconds = time.perf_counter() - began

    ids = np.fromiter((i for sink in sinks for i in sink), dtype=np.uint64)
    total = int(ids.size)
    distinct = int(np.unique(ids).size)

    if mode == "virtual":
        seconds = span_ms / 1000
    elif total:
        stamps = ids >> np.uint64(layout.timestamp_shift)
        seconds = (int(stamps.max()) - int(stamps.min()) + 1) / 1000
    else:
        seconds = duration_seconds

    ceiling = max_ids_per_second(layout)
    tps = total / seconds
    report = BenchReport(
        mode=mode,
        layout=layout.spec(),
        threads=threads,
        duration_seconds=duration_seconds,
        total_ids=total,
        distinct_ids=distinct,
        duplicates=total - distinct,
        tps=round(tps, 1),
        ceiling_tps=ceiling,
        utilization_pct=round(100 * tps / ceiling, 2),
        within_ceiling=tps <= ceiling,
        wall_seconds=round(wall_seconds, 3) if mode == "wall" else None,
    )
    logger.info("[BENCH] %d IDs, %.1f TPS (ceiling %d)", total, tps, ceiling)
    return report


def _client(url: str, count: int, timeout: float) -> dict:
    ids: List[int] = []
    latencies: List[float] = []
    server_errors = 0
    failed = 0
    with requests.Session() as session:
        for _ in range(count):
            started = time.perf_counter()
            try:
                response = session.get(url, timeout=timeout)
            except requests.exceptions.RequestException as e:
                failed += 1
                logger.debug("[BENCH] request to %s failed: %s", url, e)
                continue
            finally:
                latencies.append((time.perf_counter() - started) * 1000)
            if response.status_code >= 500:
                server_errors += 1
            elif response.ok:
                ids.append(int(response.text))
    return {"ids": ids, "latencies": latencies, "server_errors": server_errors, "failed": failed}


def run_http_load(
    url: str,
    clients: int = 100,
    total_requests: int = 100_000,
    timeout: float = 5.0,
) -> HttpLoadReport:
    """Drive GET /id on a running service and check what comes back."""
    if clients < 1 or total_requests < 1:
        raise ValueError("clients and requests must be >= 1")
    target = url.rstrip("/")
    if not target.endswith("/id"):
        target += "/id"

    shares = [total_requests // clients + (1 if i < total_requests % clients else 0)
              for i in range(clients)]
    logger.info("[BENCH] http load: %d clients, %d requests -> %s", clients, total_requests, target)

    began = time.perf_counter()
    with ThreadPoolExecutor(max_workers=clients) as pool:
        results = list(pool.map(lambda n: _client(target, n, timeout), [s for s in shares if s]))
    elapsed = time.perf_counter() - began

    all_ids = np.fromiter((i for r in results for i in r["ids"]), dtype=np.uint64)
    latencies = np.fromiter((l for r in results for l in r["latencies"]), dtype=np.float64)
    monotonic = sum(
        1 for r in results
        if len(r["ids"]) < 2 or bool(np.all(np.diff(np.asarray(r["ids"], dtype=np.int64)) > 0))
    )

    return HttpLoadReport(
        url=target,
        clients=clients,
        requests=total_requests,
        ok=int(all_ids.size),
        server_errors=sum(r["server_errors"] for r in results),
        failed_requests=sum(r["failed"] for r in results),
        distinct_ids=int(np.unique(all_ids).size),
        monotonic_clients=monotonic,
        tps=round(total_requests / elapsed, 1),
        avg_latency_ms=round(float(latencies.mean()), 3),
        p99_latency_ms=round(float(np.percentile(latencies, 99)), 3),
        elapsed_seconds=round(elapsed, 3),
    )
