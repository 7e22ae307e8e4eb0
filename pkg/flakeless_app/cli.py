"""
flakeless command line.

    flakeless generate --count 5
    flakeless decode 4210821
    flakeless resolve --strict --verify
    flakeless bench --threads 200 --duration-seconds 1 --mode virtual
    flakeless simulate churn_basic
    flakeless serve --port 8080

Exit codes: 0 ok, 1 usage or parse error, 2 identity resolution failed,
3 clock or correctness failure, 4 simulation found violations.
"""

import json
import os
import sys

import click

from flakeless_app import __version__, config
from flakeless_app.bench import run_benchmark, run_http_load
from flakeless_app.core.bit_layout import (
    PRESETS,
    REFERENCE_SCHEMES,
    SIGN_BIT,
    decompose,
    lifespan_years,
    max_ids_per_second,
    parse_layout_spec,
)
from flakeless_app.core.clock import WallClock
from flakeless_app.core.generator import Generator, GeneratorConfig, millis_to_iso, parse_epoch
from flakeless_app.errors import (
    CapacityExhausted,
    GeneratorUnavailable,
    InvalidAddress,
    InvalidConfig,
    InvalidLayout,
    ResolutionFailed,
    ScenarioInvalid,
)
from flakeless_app.identity import (
    ResolverConfig,
    resolve_machine_identity,
    verify_machine_identity,
    worker_id_conflicts,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RESOLUTION = 2
EXIT_CLOCK = 3
EXIT_VIOLATION = 4


class FlakelessGroup(click.Group):
    """click group that maps every usage problem to exit code 1."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else EXIT_OK
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        if standalone_mode:
            sys.exit(code)
        return code


def fail(ctx: click.Context, code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    ctx.exit(code)


def emit(output: str, record: dict, text: str) -> None:
    if output == "ndjson":
        click.echo(json.dumps(record, sort_keys=True))
    else:
        click.echo(text)


# --- shared options -------------------------------------------------------------

def _layout_callback(ctx, param, value):
    try:
        return parse_layout_spec(value)
    except InvalidLayout as e:
        raise click.BadParameter(str(e)) from None


def _epoch_callback(ctx, param, value):
    try:
        return parse_epoch(value)
    except InvalidConfig as e:
        raise click.BadParameter(str(e)) from None


def layout_options(func):
    func = click.option("--epoch", default=config.EPOCH, show_default=True,
                        callback=_epoch_callback, help="ISO-8601 epoch")(func)
    func = click.option("--layout", default=config.LAYOUT, show_default=True,
                        callback=_layout_callback,
                        help="standard | performance | region | t:r:m:s")(func)
    return func


def machine_id_option(func):
    return click.option("--machine-id", type=click.IntRange(0, 0xFFFF), default=None,
                        help="Skip resolution and use this worker ID")(func)


def output_option(func):
    return click.option("--output", type=click.Choice(["text", "ndjson"]), default="text",
                        show_default=True)(func)


def _resolver_config(machine_id=None, **overrides) -> ResolverConfig:
    if machine_id is not None:
        overrides["override_machine_id"] = machine_id
    return ResolverConfig.from_env(
        os.environ,
        metadata_timeout_ms=config.METADATA_TIMEOUT_MS,
        metadata_retries=config.METADATA_RETRIES,
        **overrides,
    )


# --- commands -------------------------------------------------------------------

@click.group(cls=FlakelessGroup)
@click.version_option(__version__, prog_name="flakeless")
@click.option("--log-level", default=config.LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """Stateless Snowflake-style IDs with IP-derived worker IDs."""
    # stdout carries command output, so logs go to stderr
    config.configure_logging(log_level, stream=sys.stderr)


@cli.command()
@click.option("--count", type=click.IntRange(min=1), default=1, show_default=True)
@machine_id_option
@layout_options
@output_option
@click.pass_context
def generate(ctx, count, machine_id, layout, epoch, output):
    """Print COUNT strictly increasing IDs, one per line."""
    try:
        identity = resolve_machine_identity(_resolver_config(machine_id))
    except (ResolutionFailed, InvalidConfig) as e:
        fail(ctx, EXIT_RESOLUTION, str(e))

    try:
        generator = Generator(
            GeneratorConfig(identity.machine_id, layout=layout, epoch_millis=epoch,
                            max_backward_tolerance_ms=config.MAX_BACKWARD_MS),
            WallClock(),
        )
    except InvalidConfig as e:
        fail(ctx, EXIT_USAGE, str(e))

    try:
        for _ in range(count):
            value = generator.next_id()
            emit(output, {"id": value, "machine_id": identity.machine_id}, str(value))
    except GeneratorUnavailable as e:
        fail(ctx, EXIT_CLOCK, str(e))


@cli.command()
@click.argument("id_value", metavar="ID")
@layout_options
@output_option
@click.pass_context
def decode(ctx, id_value, layout, epoch, output):
    """Break an ID into its fields."""
    text = id_value.strip()
    if not (text.isascii() and text.isdigit()) or int(text) >> 64:
        fail(ctx, EXIT_USAGE, f"{id_value!r} is not an unsigned 64-bit decimal")
    value = int(text)
    if value & SIGN_BIT:
        fail(ctx, EXIT_USAGE, f"{value} has the sign bit set")

    parts = decompose(layout, value)
    record = {
        "id": value,
        "layout": layout.spec(),
        "timestamp_offset_ms": parts.timestamp_offset,
        "absolute_time": millis_to_iso(epoch + parts.timestamp_offset),
        "region": parts.region,
        "machine_id": parts.machine_id,
        "sequence": parts.sequence,
    }
    if layout.machine_bits == 16:
        record["ip_suffix"] = f"{parts.machine_id >> 8}.{parts.machine_id & 0xFF}"

    lines = [f"{key:<20}{val}" for key, val in record.items()]
    emit(output, record, "\n".join(lines))


@cli.command()
@click.option("--strict", is_flag=True, help="Fail instead of falling back when metadata is unreachable")
@click.option("--verify", is_flag=True, help="Check the address is bound to a local interface")
@machine_id_option
@output_option
@click.pass_context
def resolve(ctx, strict, verify, machine_id, output):
    """Resolve and print this host's machine identity."""
    overrides = {"strict": True} if strict else {}
    try:
        identity = resolve_machine_identity(_resolver_config(machine_id, **overrides))
    except (ResolutionFailed, InvalidConfig) as e:
        fail(ctx, EXIT_RESOLUTION, str(e))

    record = identity.to_dict(include_ip=True)
    if verify:
        record["verified"] = verify_machine_identity(identity)

    lines = [f"{key:<14}{'' if val is None else val}" for key, val in record.items()]
    emit(output, record, "\n".join(lines))
    if verify and strict and not record["verified"]:
        fail(ctx, EXIT_RESOLUTION, f"{identity.source_ip or 'override'} is not bound to a local interface")


@cli.command()
@click.option("--threads", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--duration-seconds", type=click.FloatRange(min=0, min_open=True), default=1.0,
              show_default=True)
@click.option("--mode", type=click.Choice(["virtual", "wall", "http"]), default="virtual",
              show_default=True)
@click.option("--url", default="http://127.0.0.1:8080", show_default=True, help="http mode target")
@click.option("--requests", "total_requests", type=click.IntRange(min=1), default=100_000,
              show_default=True, help="http mode request count")
@machine_id_option
@layout_options
@output_option
@click.pass_context
def bench(ctx, threads, duration_seconds, mode, url, total_requests, machine_id, layout, epoch, output):
    """Measure throughput against the per-node ceiling."""
    if mode == "http":
        report = run_http_load(url, clients=threads, total_requests=total_requests)
        click.echo(report.render_ndjson() if output == "ndjson" else report.render_text())
        broken = (report.server_errors or report.failed_requests or report.distinct_ids != report.ok
                  or report.monotonic_clients != min(threads, total_requests))
        if broken:
            fail(ctx, EXIT_CLOCK,
                 f"{report.failed_requests} failed requests, {report.server_errors} 5xx responses, "
                 f"{report.ok - report.distinct_ids} duplicates")
        return

    report = run_benchmark(
        threads=threads,
        duration_seconds=duration_seconds,
        mode=mode,
        layout=layout,
        machine_id=1 if machine_id is None else machine_id,
        epoch_millis=epoch,
    )
    click.echo(report.render_ndjson() if output == "ndjson" else report.render_text())
    if report.duplicates:
        fail(ctx, EXIT_CLOCK, f"{report.duplicates} duplicate IDs")


@cli.command()
@click.argument("scenario", required=False)
@click.option("--scenario", "scenario_option", metavar="FILE", help="Same as the SCENARIO argument")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the scenario seed")
@click.option("--show-events", is_flag=True, help="Print the event log")
@output_option
@click.pass_context
def simulate(ctx, scenario, scenario_option, seed, show_events, output):
    """Run a churn SCENARIO (file path or bundled name) and audit every ID."""
    from flakeless_app.simulation import load_scenario, run_simulation, with_overrides

    scenario = scenario or scenario_option
    if not scenario:
        fail(ctx, EXIT_USAGE, "give a scenario file or bundled scenario name")
    try:
        loaded = load_scenario(scenario)
        if seed is not None:
            loaded = with_overrides(loaded, seed=seed)
        report = run_simulation(loaded)
    except (FileNotFoundError, ScenarioInvalid, CapacityExhausted) as e:
        fail(ctx, EXIT_USAGE, str(e))

    if output == "ndjson":
        click.echo(report.render_ndjson(show_events))
    else:
        click.echo(report.render_text(show_events))
    if report.violations:
        ctx.exit(EXIT_VIOLATION)


@cli.command()
@click.option("--host", default=config.HOST, show_default=True)
@click.option("--port", type=click.IntRange(1, 65535), default=config.PORT, show_default=True)
@click.option("--layout", default=config.LAYOUT, show_default=True)
@click.option("--epoch", default=config.EPOCH, show_default=True)
@click.option("--show-ip", is_flag=True, default=config.STATS_SHOW_IP, help="Include source_ip in /stats")
@machine_id_option
@click.pass_context
def serve(ctx, host, port, layout, epoch, show_ip, machine_id):
    """Run the HTTP ID service."""
    import uvicorn
    from pydantic import ValidationError

    from flakeless_app.main import ServiceConfig, create_app

    try:
        settings = ServiceConfig(host=host, port=port, layout=layout, epoch=epoch,
                                 show_ip=show_ip, machine_id=machine_id)
    except ValidationError as e:
        fail(ctx, EXIT_USAGE, str(e))
    try:
        app = create_app(settings)
    except ResolutionFailed as e:
        fail(ctx, EXIT_RESOLUTION, str(e))
    except InvalidConfig as e:
        fail(ctx, EXIT_USAGE, str(e))

    # access lines on stdout, every other log on stderr
    config.route_access_log(sys.stdout)
    uvicorn.run(app, host=settings.host, port=settings.port, access_log=False,
                log_level=config.LOG_LEVEL.lower())


@cli.command()
@output_option
def layouts(output):
    """List layout presets and reference schemes."""
    for layout in PRESETS.values():
        record = {
            "type": "layout",
            "name": layout.name,
            "spec": layout.spec(),
            "timestamp_shift": layout.timestamp_shift,
            "region_shift": layout.region_shift,
            "machine_shift": layout.machine_shift,
            "max_ids_per_second": max_ids_per_second(layout),
            "lifespan_years": round(lifespan_years(layout), 1),
        }
        emit(output, record,
             f"{layout.name:<12} {layout.spec():<10} shift={layout.timestamp_shift:<3} "
             f"{max_ids_per_second(layout):>7} ids/s  {lifespan_years(layout):5.1f} years")
    for scheme in REFERENCE_SCHEMES:
        record = {
            "type": "reference_scheme",
            "name": scheme.name,
            "coordination_needed": scheme.coordination_needed,
            "time_unit_ms": scheme.time_unit_ms,
            "machine_id_source": scheme.machine_id_source,
            "sequence_bits": scheme.sequence_bits,
            "monotonic": scheme.monotonic,
            "max_tps": scheme.max_tps,
        }
        emit(output, record,
             f"{scheme.name:<18} {scheme.time_unit_ms:>2} ms  seq={scheme.sequence_bits:<2} "
             f"{scheme.max_tps:>9} ids/s  coordination={'yes' if scheme.coordination_needed else 'no'}")


@cli.command("check-subnets")
@click.argument("cidrs", nargs=-1, required=True)
@output_option
@click.pass_context
def check_subnets(ctx, cidrs, output):
    """Report addresses in different CIDRS that would share a worker ID."""
    try:
        conflicts = worker_id_conflicts(cidrs)
    except InvalidAddress as e:
        fail(ctx, EXIT_USAGE, str(e))

    for first, second, worker_id in conflicts:
        emit(output, {"first": first, "second": second, "worker_id": worker_id},
             f"{first} and {second} both map to worker_id {worker_id}")
    if conflicts:
        fail(ctx, EXIT_RESOLUTION, f"{len(conflicts)} worker ID conflicts")
    emit(output, {"conflicts": 0}, "no conflicts")


@cli.command("mock-metadata")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=click.IntRange(1, 65535), default=8169, show_default=True)
@click.option("--aws-ip", default="10.0.1.2", show_default=True)
@click.option("--gcp-ip", default="10.8.3.4", show_default=True)
@click.option("--azure-ip", default="10.240.0.7", show_default=True)
def mock_metadata(host, port, aws_ip, gcp_ip, azure_ip):
    """Serve mock ECS, GCP and Azure metadata endpoints."""
    import uvicorn

    from flakeless_app.identity.mock_metadata import create_mock_metadata_app, mock_endpoint_env

    for key, value in mock_endpoint_env(f"http://{host}:{port}").items():
        click.echo(f"export {key}={value!r}")
    uvicorn.run(create_mock_metadata_app(aws_ip, gcp_ip, azure_ip), host=host, port=port,
                log_level="warning")


def main():
    cli(prog_name="flakeless")


if __name__ == "__main__":
    main()
