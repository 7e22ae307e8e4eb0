"""
Service tests run against a VirtualClock-backed generator through
fastapi.testclient.TestClient.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from flakeless_app.core.clock import VirtualClock
from flakeless_app.core.generator import DEFAULT_EPOCH_MILLIS, Generator, GeneratorConfig
from flakeless_app.identity import Derivation, MachineIdentity, Provider
from flakeless_app.main import ServiceConfig, create_app

EPOCH = DEFAULT_EPOCH_MILLIS
IDENTITY = MachineIdentity(258, "10.0.1.2", Provider.AWS_ECS, Derivation.RAW_OCTETS)


def make_client(clock, show_ip=False, batch_cap=10_000):
    generator = Generator(GeneratorConfig(machine_id=258), clock, batch_cap=batch_cap)
    settings = ServiceConfig(show_ip=show_ip, batch_cap=batch_cap, layout="standard",
                             epoch="2024-01-01T00:00:00Z")
    return TestClient(create_app(settings, generator=generator, identity=IDENTITY))


@pytest.fixture
def client(clock):
    return make_client(clock)


def test_root_reports_layout(client):
    body = client.get("/").json()
    assert body["ok"] is True
    assert body["layout"]["spec"] == "41:0:16:6"
    assert body["max_ids_per_second"] == 64_000


def test_id_at_epoch_plus_one(client):
    response = client.get("/id")
    assert response.status_code == 200
    assert response.text == "4210816"
    assert response.headers["content-type"].startswith("text/plain")


def test_sequential_ids_increase(client):
    first = int(client.get("/id").text)
    second = int(client.get("/id").text)
    assert second > first


def test_regression_beyond_tolerance_is_503_and_unhealthy(client, clock):
    clock.advance(20)
    assert client.get("/id").status_code == 200
    clock.regress(11)

    response = client.get("/id")
    assert response.status_code == 503
    assert response.json()["reason"] == "clock_moved_backwards"
    assert client.get("/healthz").status_code == 503

    clock.advance(12)
    assert client.get("/id").status_code == 200
    assert client.get("/healthz").text == "ok"


def test_regression_within_tolerance_is_served(client, clock):
    clock.advance(20)
    before = int(client.get("/id").text)
    clock.regress(10)
    response = client.get("/id")
    assert response.status_code == 200
    assert int(response.text) > before


def test_batch(client, clock):
    clock.auto_advance = True
    lines = client.get("/id/batch", params={"count": 100}).text.splitlines()
    ids = [int(line) for line in lines]
    assert len(ids) == 100
    assert all(a < b for a, b in zip(ids, ids[1:]))
    assert len(client.get("/id/batch", params={"count": 1}).text.splitlines()) == 1


@pytest.mark.parametrize("query", ["", "?count=0", "?count=-3", "?count=abc", "?count=11"])
def test_batch_rejects_bad_counts(clock, query):
    client = make_client(clock, batch_cap=10)
    assert client.get("/id/batch" + query).status_code == 400


def test_batch_returns_503_on_regression(client, clock):
    clock.advance(20)
    client.get("/id")
    clock.regress(15)
    assert client.get("/id/batch", params={"count": 5}).status_code == 503


def test_decode(client):
    body = client.get("/decode/4210821").json()
    assert body["timestamp_offset_ms"] == 1
    assert body["machine_id"] == 258
    assert body["sequence"] == 5
    assert body["region"] == 0
    assert body["absolute_time"] == "2024-01-01T00:00:00.001Z"


def test_decode_zero_is_the_epoch(client):
    body = client.get("/decode/0").json()
    assert body["absolute_time"] == "2024-01-01T00:00:00.000Z"
    assert (body["machine_id"], body["sequence"], body["timestamp_offset_ms"]) == (0, 0, 0)


@pytest.mark.parametrize("raw", ["abc", "-1", "1.5", str(1 << 63), str(1 << 64)])
def test_decode_rejects(client, raw):
    assert client.get(f"/decode/{raw}").status_code == 400


def test_stats_counts_and_hides_ip(client):
    assert client.get("/stats").json()["ids_issued"] == 0
    for _ in range(10):
        client.get("/id")
    body = client.get("/stats").json()
    assert body["ids_issued"] == 10
    assert body["identity"]["provider"] == "aws_ecs"
    assert body["identity"]["derivation"] == "raw_octets"
    assert "source_ip" not in body["identity"]


def test_stats_can_show_ip(clock):
    body = make_client(clock, show_ip=True).get("/stats").json()
    assert body["identity"]["source_ip"] == "10.0.1.2"


def test_access_log_line(client, caplog):
    with caplog.at_level(logging.INFO, logger="flakeless.access"):
        client.get("/id")
    lines = [r.getMessage() for r in caplog.records if r.name == "flakeless.access"]
    assert lines
    assert "method=GET path=/id status=200 latency_us=" in lines[-1]
    assert lines[-1].startswith("ts=")


def test_service_config_bounds():
    with pytest.raises(ValueError):
        ServiceConfig(port=0)
    with pytest.raises(ValueError):
        ServiceConfig(port=70_000)
    with pytest.raises(ValueError):
        ServiceConfig(layout="41:1:16:6")
    with pytest.raises(ValueError):
        ServiceConfig(batch_cap=0)


def test_app_resolves_identity_from_env(monkeypatch):
    monkeypatch.setenv("FLAKELESS_MACHINE_ID", "77")
    clock = VirtualClock(start=EPOCH + 1)
    client = TestClient(create_app(ServiceConfig(), clock=clock))
    assert client.get("/stats").json()["identity"]["machine_id"] == 77
    assert client.get("/decode/" + client.get("/id").text).json()["machine_id"] == 77


def test_concurrent_requests_never_duplicate():
    clock = VirtualClock(start=EPOCH + 1, auto_advance=True)
    client = make_client(clock)

    def fetch(_):
        return int(client.get("/id").text)

    with ThreadPoolExecutor(max_workers=32) as pool:
        ids = list(pool.map(fetch, range(2_000)))
    assert len(set(ids)) == 2_000
