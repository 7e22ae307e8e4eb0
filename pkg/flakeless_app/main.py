"""
flakeless ID service.

One generator per process. Issuance endpoints answer in plain text so load
tools can read a bare decimal; everything else is JSON.

    uvicorn flakeless_app.main:app --port 8080      # uses FLAKELESS_* env
    python -m flakeless_app serve --port 8080
"""

import logging
import os
import time
from datetime import datetime, timezone
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field, field_validator

from flakeless_app import __version__, config
from flakeless_app.core.bit_layout import (
    SIGN_BIT,
    BitLayout,
    decompose,
    max_ids_per_second,
    parse_layout_spec,
)
from flakeless_app.core.clock import ClockSource, WallClock
from flakeless_app.core.generator import (
    Generator,
    GeneratorConfig,
    millis_to_iso,
    parse_epoch,
)
from flakeless_app.errors import BatchTooLarge, FlakelessError, GeneratorUnavailable
from flakeless_app.identity import MachineIdentity, ResolverConfig, resolve_machine_identity

logger = logging.getLogger(__name__)
access_logger = logging.getLogger(config.ACCESS_LOGGER)


class ServiceConfig(BaseModel):
    host: str = config.HOST
    port: int = Field(config.PORT, ge=1, le=65535)
    layout: str = config.LAYOUT
    epoch: str = config.EPOCH
    max_backward_ms: int = Field(config.MAX_BACKWARD_MS, ge=0)
    batch_cap: int = Field(config.BATCH_CAP, ge=1)
    show_ip: bool = config.STATS_SHOW_IP
    machine_id: Optional[int] = Field(None, ge=0, le=0xFFFF)

    @field_validator("layout")
    @classmethod
    def _layout_parses(cls, value: str) -> str:
        parse_layout_spec(value)
        return value

    @field_validator("epoch")
    @classmethod
    def _epoch_parses(cls, value: str) -> str:
        parse_epoch(value)
        return value

    @property
    def bit_layout(self) -> BitLayout:
        return parse_layout_spec(self.layout)

    @property
    def epoch_millis(self) -> int:
        return parse_epoch(self.epoch)


def build_generator(
    settings: ServiceConfig,
    clock: Optional[ClockSource] = None,
    identity: Optional[MachineIdentity] = None,
) -> tuple:
    """Resolve the identity (unless given) and build the process generator."""
    if identity is None:
        resolver_config = ResolverConfig.from_env(
            os.environ,
            metadata_timeout_ms=config.METADATA_TIMEOUT_MS,
            metadata_retries=config.METADATA_RETRIES,
            **({"override_machine_id": settings.machine_id} if settings.machine_id is not None else {}),
        )
        identity = resolve_machine_identity(resolver_config)
    generator = Generator(
        GeneratorConfig(
            machine_id=identity.machine_id,
            layout=settings.bit_layout,
            epoch_millis=settings.epoch_millis,
            max_backward_tolerance_ms=settings.max_backward_ms,
        ),
        clock or WallClock(),
        batch_cap=settings.batch_cap,
    )
    return generator, identity


def create_app(
    settings: Optional[ServiceConfig] = None,
    generator: Optional[Generator] = None,
    identity: Optional[MachineIdentity] = None,
    clock: Optional[ClockSource] = None,
) -> FastAPI:
    """
    Build the service.

    Args:
        settings: ServiceConfig; defaults come from the FLAKELESS_* env
        generator: a ready generator (tests pass one on a VirtualClock)
        identity: the MachineIdentity the generator was built for
        clock: clock for a generator built here; WallClock when omitted
    """
    settings = settings or ServiceConfig()
    if generator is None:
        generator, identity = build_generator(settings, clock=clock, identity=identity)

    layout = generator.config.layout
    epoch_millis = generator.config.epoch_millis

    app = FastAPI(
        title="flakeless",
        description="Stateless Snowflake-style ID service with IP-derived worker IDs",
        version=__version__,
    )
    app.state.generator = generator
    app.state.identity = identity
    app.state.terminal_error = None

    def issued(result):
        app.state.terminal_error = None
        return result

    def unavailable(error: GeneratorUnavailable) -> JSONResponse:
        app.state.terminal_error = error.reason
        logger.error("[GENERATOR] issuance refused: %s", error)
        return JSONResponse(
            {"ok": False, "reason": error.reason, "error": str(error)},
            status_code=503,
        )

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        started = time.perf_counter_ns()
        status = 500
        try:
            response = await call_next(request)
            status = response.status_code
            return response
        finally:
            access_logger.info(
                "ts=%s method=%s path=%s status=%d latency_us=%d",
                datetime.now(timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z"),
                request.method,
                request.url.path,
                status,
                (time.perf_counter_ns() - started) // 1000,
            )

    @app.on_event("startup")
    async def startup_event():
        logger.info("[STARTUP] flakeless %s starting up...", __version__)
        logger.info("[OK] layout %s, epoch %s", layout.spec(), millis_to_iso(epoch_millis))
        if identity is not None:
            logger.info("[OK] machine_id %d via %s (%s)", identity.machine_id,
                        identity.provider.value, identity.derivation.value)

    @app.get("/")
    async def root():
        """Service info."""
        return {
            "ok": True,
            "message": "flakeless ID service",
            "version": __version__,
            "layout": {"name": layout.name, "spec": layout.spec()},
            "epoch": millis_to_iso(epoch_millis),
            "max_ids_per_second": max_ids_per_second(layout),
            "endpoints": ["/id", "/id/batch?count=N", "/decode/{id}", "/healthz", "/stats"],
        }

    @app.get("/id", response_class=PlainTextResponse)
    def next_id():
        try:
            return PlainTextResponse(str(issued(generator.next_id())))
        except GeneratorUnavailable as e:
            return unavailable(e)

    @app.get("/id/batch", response_class=PlainTextResponse)
    def next_batch(count: Optional[str] = None):
        if count is None or not count.strip().isdigit():
            raise HTTPException(status_code=400, detail="count must be a positive integer")
        n = int(count)
        if n < 1:
            raise HTTPException(status_code=400, detail="count must be >= 1")
        try:
            ids = issued(generator.next_batch(n))
        except BatchTooLarge as e:
            raise HTTPException(status_code=400, detail=str(e))
        except GeneratorUnavailable as e:
            return unavailable(e)
        return PlainTextResponse("\n".join(map(str, ids)))

    @app.get("/decode/{raw_id}")
    async def decode_id(raw_id: str):
        if not (raw_id.isascii() and raw_id.isdigit()):
            raise HTTPException(status_code=400, detail=f"{raw_id!r} is not an unsigned decimal")
        value = int(raw_id)
        if value >= 1 << 64:
            raise HTTPException(status_code=400, detail="value does not fit in 64 bits")
        if value & SIGN_BIT:
            raise HTTPException(status_code=400, detail="sign bit is set")
        parts = decompose(layout, value)
        return {
            "id": raw_id,
            "layout": layout.spec(),
            "timestamp_offset_ms": parts.timestamp_offset,
            "absolute_time": millis_to_iso(epoch_millis + parts.timestamp_offset),
            "region": parts.region,
            "machine_id": parts.machine_id,
            "sequence": parts.sequence,
        }

    @app.get("/healthz", response_class=PlainTextResponse)
    async def healthz():
        if app.state.terminal_error:
            return JSONResponse(
                {"ok": False, "reason": app.state.terminal_error}, status_code=503
            )
        return PlainTextResponse("ok")

    @app.get("/stats")
    async def stats():
        data = generator.stats().to_dict()
        data["layout"] = layout.spec()
        data["healthy"] = app.state.terminal_error is None
        data["identity"] = identity.to_dict(include_ip=settings.show_ip) if identity else None
        return data

    @app.exception_handler(FlakelessError)
    async def flakeless_error_handler(request: Request, exc: FlakelessError):
        logger.error("[ERROR] %s %s: %s", request.method, request.url.path, exc, exc_info=exc)
        return JSONResponse({"ok": False, "error": str(exc)}, status_code=500)

    return app


def __getattr__(name: str):
    # `uvicorn flakeless_app.main:app` builds the app from the env on first access
    if name == "app":
        config.configure_logging()
        application = create_app()
        globals()["app"] = application
        return application
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
