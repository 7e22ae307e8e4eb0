"""
Shared fixtures: virtual clocks, ready-made generators and a live mock
metadata server on a free localhost port.
"""

import socket
import threading
import time

import pytest
import uvicorn

from flakeless_app.core.clock import VirtualClock
from flakeless_app.core.generator import DEFAULT_EPOCH_MILLIS, Generator, GeneratorConfig
from flakeless_app.identity.mock_metadata import create_mock_metadata_app, mock_endpoint_env

EPOCH = DEFAULT_EPOCH_MILLIS


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def clock():
    """Frozen one millisecond after the default epoch."""
    return VirtualClock(start=EPOCH + 1)


@pytest.fixture
def make_generator(clock):
    def _make(machine_id=258, **kwargs):
        batch_cap = kwargs.pop("batch_cap", 10_000)
        return Generator(GeneratorConfig(machine_id=machine_id, **kwargs), clock, batch_cap=batch_cap)
    return _make


def _free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class _LiveServer:
    def __init__(self, app):
        self.port = _free_port()
        self.base_url = f"http://127.0.0.1:{self.port}"
        self.server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="warning")
        )
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self):
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("test server did not start")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=5)


@pytest.fixture(scope="session")
def mock_metadata():
    """Mock ECS/GCP/Azure metadata served over real HTTP."""
    with _LiveServer(create_mock_metadata_app()) as server:
        server.env = mock_endpoint_env(server.base_url)
        yield server


@pytest.fixture(scope="session")
def failing_metadata():
    """Same routes, every one answering 500."""
    with _LiveServer(create_mock_metadata_app(fail_status=500)) as server:
        server.env = mock_endpoint_env(server.base_url)
        yield server


@pytest.fixture
def serve_app():
    """Context manager factory: `with serve_app(app) as server: server.base_url`."""
    return _LiveServer
