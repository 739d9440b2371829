"""Command-line driver mirroring the HTTP API for scripted engagements.

Exit codes: 0 success, 1 tool error (target unreachable, exception
response), 2 usage error. Structured mode (--json) emits the same records
the API returns in its `result` field, one JSON object per line.
"""

from __future__ import annotations

import json
import signal
import sys
import threading
from pathlib import Path

import click

import icskit
from icskit import ops
from icskit.evidence.report import LlmConfig, ReportRequest, ReportError, run_report_pipeline
from icskit.evidence.store import EvidenceStore
from icskit.opcua import AuthConfig, build_production_line_model, load_model, serve_opcua
from icskit.service.config import ServiceConfig
from icskit.simulators import (
    build_default_testbed,
    build_water_plant_profile,
    load_profiles,
    serve_modbus,
    water_plant_ticker,
)

EXIT_OK = 0
EXIT_TOOL_ERROR = 1
EXIT_USAGE = 2


class Context:
    def __init__(self, as_json: bool, evidence_path: str | None, config_file: str | None):
        self.as_json = as_json
        self.config = ServiceConfig.load(config_file)
        if evidence_path:
            self.config.evidence_path = Path(evidence_path)
        self.store = EvidenceStore(self.config.evidence_path)

    def emit(self, outcome: ops.ToolOutcome) -> None:
        if self.as_json:
            record = dict(outcome.output)
            if outcome.evidence_id:
                record["evidence_id"] = outcome.evidence_id
            click.echo(json.dumps(record, sort_keys=True, default=str))
        else:
            click.echo(ops.summarize_output(outcome))
            if outcome.evidence_id:
                click.echo(f"evidence stored: {outcome.evidence_id}")

    def run(self, category: str, action: str, params: dict, store_evidence: bool) -> None:
        try:
            outcome = ops.execute_tool(
                category, action, params,
                evidence_store=self.store, store_evidence=store_evidence,
            )
        except ValueError as e:
            raise click.UsageError(str(e)) from e
        if outcome.error_kind == "validation":
            error = outcome.output.get("error", {})
            raise click.UsageError(str(error.get("message", "invalid parameters")))
        self.emit(outcome)
        if not outcome.ok:
            sys.exit(EXIT_TOOL_ERROR)


pass_context = click.make_pass_decorator(Context)


@click.group()
@click.option("--json", "as_json", is_flag=True, help="Emit line-delimited JSON records.")
@click.option("--evidence-path", default=None, help="Evidence inbox file override.")
@click.option("--config", "config_file", default=None, help="Config file (JSON).")
@click.version_option(icskit.__version__)
@click.pass_context
def main(ctx: click.Context, as_json: bool, evidence_path: str | None,
         config_file: str | None) -> None:
    """ICS security assessment toolkit."""
    ctx.obj = Context(as_json, evidence_path, config_file)


# -- scan -----------------------------------------------------------------


@main.command()
@click.option("--hosts", required=True, help="Host, CIDR block, or comma list.")
@click.option("--ports", required=True, help="Port list and/or A-B ranges.")
@click.option("--timeout", "timeout_ms", default=500, show_default=True)
@click.option("--concurrency", default=256, show_default=True)
@click.option("--no-classify", is_flag=True, help="Skip protocol classification.")
@click.option("--store-evidence", "-E", is_flag=True)
@pass_context
def scan(ctx: Context, hosts: str, ports: str, timeout_ms: int, concurrency: int,
         no_classify: bool, store_evidence: bool) -> None:
    """TCP-connect scan with protocol classification."""
    ctx.run("scan", "scan", {
        "hosts": hosts,
        "ports": ports,
        "timeout_ms": timeout_ms,
        "concurrency": concurrency,
        "classify": not no_classify,
    }, store_evidence)


# -- modbus -----------------------------------------------------------------


def modbus_options(fn):
    fn = click.option("--host", required=True)(fn)
    fn = click.option("--port", default=502, show_default=True)(fn)
    fn = click.option("--unit", "unit_id", default=1, show_default=True)(fn)
    fn = click.option("--timeout", "timeout_ms", default=1000, show_default=True)(fn)
    fn = click.option("--retries", default=1, show_default=True)(fn)
    fn = click.option("--store-evidence", "-E", is_flag=True)(fn)
    return fn


TYPE_CHOICE = click.Choice(
    ["coil", "discrete_input", "holding_register", "input_register"]
)


@main.group()
def modbus() -> None:
    """Modbus TCP operations."""


@modbus.command("read")
@modbus_options
@click.option("--type", "dtype", type=TYPE_CHOICE, default="holding_register",
              show_default=True)
@click.option("--address", required=True, type=int)
@click.option("--count", default=1, show_default=True, type=int)
@pass_context
def modbus_read(ctx: Context, host, port, unit_id, timeout_ms, retries,
                store_evidence, dtype, address, count) -> None:
    """Read values from user-specified addresses."""
    ctx.run("modbus", "read", {
        "host": host, "port": port, "unit_id": unit_id,
        "timeout_ms": timeout_ms, "retries": retries,
        "type": dtype, "address": address, "count": count,
    }, store_evidence)


@modbus.command("write")
@modbus_options
@click.option("--type", "dtype", type=TYPE_CHOICE, default="holding_register",
              show_default=True)
@click.option("--address", required=True, type=int)
@click.option("--values", required=True,
              help="Comma-separated values (bits: 0/1).")
@click.option("--read-back", is_flag=True, help="Read before and after the write.")
@pass_context
def modbus_write(ctx: Context, host, port, unit_id, timeout_ms, retries,
                 store_evidence, dtype, address, values, read_back) -> None:
    """Write coil or register values."""
    try:
        parsed = [int(v.strip()) for v in values.split(",") if v.strip()]
    except ValueError as e:
        raise click.UsageError(f"values must be integers: {e}") from e
    ctx.run("modbus", "write", {
        "host": host, "port": port, "unit_id": unit_id,
        "timeout_ms": timeout_ms, "retries": retries,
        "type": dtype, "address": address, "values": parsed, "read_back": read_back,
    }, store_evidence)


@modbus.command("enum")
@modbus_options
@click.option("--type", "dtype", type=TYPE_CHOICE, default="holding_register",
              show_default=True)
@click.option("--start", required=True, type=int)
@click.option("--end", required=True, type=int)
@pass_context
def modbus_enum(ctx: Context, host, port, unit_id, timeout_ms, retries,
                store_evidence, dtype, start, end) -> None:
    """Enumerate every accessible value in an address range."""
    ctx.run("modbus", "enumerate", {
        "host": host, "port": port, "unit_id": unit_id,
        "timeout_ms": timeout_ms, "retries": retries,
        "type": dtype, "start": start, "end": end,
    }, store_evidence)


@modbus.command("scan-units")
@modbus_options
@click.option("--range", "id_range", default="1-254", show_default=True,
              help="Unit id range, e.g. 1-15.")
@click.option("--concurrency", default=16, show_default=True)
@pass_context
def modbus_scan_units(ctx: Context, host, port, unit_id, timeout_ms, retries,
                      store_evidence, id_range, concurrency) -> None:
    """Probe a unit-id range for active devices."""
    try:
        start_s, _, end_s = id_range.partition("-")
        start, end = int(start_s), int(end_s or start_s)
    except ValueError as e:
        raise click.UsageError(f"--range must be like 1-15: {e}") from e
    ctx.run("modbus", "scan_units", {
        "host": host, "port": port,
        "timeout_ms": timeout_ms, "retries": retries,
        "start": start, "end": end, "concurrency": concurrency,
    }, store_evidence)


@modbus.command("scan-range")
@modbus_options
@click.option("--type", "dtype", type=TYPE_CHOICE, default="holding_register",
              show_default=True)
@click.option("--start", required=True, type=int)
@click.option("--end", required=True, type=int)
@click.option("--chunk-size", default=1000, show_default=True, type=int)
@pass_context
def modbus_scan_range(ctx: Context, host, port, unit_id, timeout_ms, retries,
                      store_evidence, dtype, start, end, chunk_size) -> None:
    """Chunked accessibility scan over an address range."""
    ctx.run("modbus", "scan_range", {
        "host": host, "port": port, "unit_id": unit_id,
        "timeout_ms": timeout_ms, "retries": retries,
        "type": dtype, "start": start, "end": end, "chunk_size": chunk_size,
    }, store_evidence)


# -- opcua -----------------------------------------------------------------


def opcua_options(fn):
    fn = click.option("--url", "endpoint_url", required=True,
                      help="opc.tcp endpoint URL.")(fn)
    fn = click.option("--user", default=None, help="Username (default anonymous).")(fn)
    fn = click.option("--password", default="", help="Password for --user.")(fn)
    fn = click.option("--store-evidence", "-E", is_flag=True)(fn)
    return fn


def _opcua_params(endpoint_url: str, user: str | None, password: str) -> dict:
    params: dict = {"endpoint_url": endpoint_url}
    if user:
        params["auth"] = {"username": user, "password": password}
    return params


@main.group()
def opcua() -> None:
    """OPC UA operations."""


@opcua.command("endpoints")
@opcua_options
@pass_context
def opcua_endpoints(ctx: Context, endpoint_url, user, password, store_evidence) -> None:
    """List advertised endpoints with policy, mode, and token types."""
    ctx.run("opcua", "endpoints", _opcua_params(endpoint_url, user, password),
            store_evidence)


@opcua.command("browse")
@opcua_options
@click.option("--root", default=None, help="Browse origin node id.")
@click.option("--depth", default=5, show_default=True, type=int)
@click.option("--max-nodes", default=500, show_default=True, type=int)
@pass_context
def opcua_browse(ctx: Context, endpoint_url, user, password, store_evidence,
                 root, depth, max_nodes) -> None:
    """Recursive namespace traversal."""
    params = _opcua_params(endpoint_url, user, password)
    params.update({"root": root, "depth": depth, "max_nodes": max_nodes})
    ctx.run("opcua", "browse", params, store_evidence)


@opcua.command("enum")
@opcua_options
@click.option("--namespace", "namespace_index", required=True, type=int)
@pass_context
def opcua_enum(ctx: Context, endpoint_url, user, password, store_evidence,
               namespace_index) -> None:
    """Profile every variable in a namespace."""
    params = _opcua_params(endpoint_url, user, password)
    params["namespace_index"] = namespace_index
    ctx.run("opcua", "enumerate", params, store_evidence)


@opcua.command("read")
@opcua_options
@click.option("--node", "node_id", required=True, help='Node id, e.g. "ns=2;i=20".')
@pass_context
def opcua_read(ctx: Context, endpoint_url, user, password, store_evidence,
               node_id) -> None:
    """Read a node value."""
    params = _opcua_params(endpoint_url, user, password)
    params["node_id"] = node_id
    ctx.run("opcua", "read", params, store_evidence)


@opcua.command("write")
@opcua_options
@click.option("--node", "node_id", required=True)
@click.option("--int32", "int32_value", type=int, default=None)
@click.option("--double", "double_value", type=float, default=None)
@click.option("--bool", "bool_value", type=bool, default=None)
@click.option("--string", "string_value", default=None)
@click.option("--read-back", is_flag=True)
@pass_context
def opcua_write(ctx: Context, endpoint_url, user, password, store_evidence,
                node_id, int32_value, double_value, bool_value, string_value,
                read_back) -> None:
    """Write a typed node value (exactly one of the value flags)."""
    values = [
        ("INT32", int32_value),
        ("DOUBLE", double_value),
        ("BOOLEAN", bool_value),
        ("STRING", string_value),
    ]
    given = [(t, v) for t, v in values if v is not None]
    if len(given) != 1:
        raise click.UsageError(
            "provide exactly one of --int32 / --double / --bool / --string"
        )
    params = _opcua_params(endpoint_url, user, password)
    params.update({
        "node_id": node_id,
        "value": {"type": given[0][0], "value": given[0][1]},
        "read_back": read_back,
    })
    ctx.run("opcua", "write", params, store_evidence)


# -- inbox -----------------------------------------------------------------


@main.group()
def inbox() -> None:
    """Evidence inbox management."""


@inbox.command("list")
@click.option("--category", type=click.Choice(["scan", "modbus", "opcua"]),
              default=None)
@pass_context
def inbox_list(ctx: Context, category) -> None:
    """List stored evidence items."""
    items = ctx.store.items(category=category)
    if ctx.as_json:
        for item in items:
            click.echo(json.dumps(item.to_dict(), sort_keys=True, default=str))
    else:
        if not items:
            click.echo("inbox is empty")
            return
        for item in items:
            click.echo(f"{item.item_id}  {item.timestamp}  {item.category:7s}  "
                       f"{item.params.get('action', '-')}")


@inbox.command("clear")
@click.confirmation_option(prompt="Clear the entire evidence inbox?")
@pass_context
def inbox_clear(ctx: Context) -> None:
    """Delete every stored evidence item."""
    ctx.store.clear()
    click.echo("inbox cleared")


# -- reporting ---------------------------------------------------------------


@main.command()
@click.option("--audience", type=click.Choice(["executive", "technical"]),
              required=True)
@click.option("--title", default="ICS/OT Security Assessment", show_default=True)
@click.option("--model", default="gpt-4o-mini", show_default=True)
@click.option("--max-items", default=200, show_default=True, type=int)
@click.option("--output", "output_path", default=None,
              help="Write the report to this path (default: reports dir).")
@click.option("--offline", is_flag=True,
              help="Force the deterministic offline renderer.")
@pass_context
def report(ctx: Context, audience: str, title: str, model: str, max_items: int,
           output_path: str | None, offline: bool) -> None:
    """Generate an assessment report from the evidence inbox."""
    request = ReportRequest(audience=audience, title=title, model=model,
                            max_items=max_items)
    llm = LlmConfig() if offline else ctx.config.llm
    try:
        generated = run_report_pipeline(
            ctx.store, request, llm=llm, reports_dir=ctx.config.reports_dir
        )
    except ReportError as e:
        click.echo(f"report generation failed: {e}", err=True)
        sys.exit(EXIT_TOOL_ERROR)
    if output_path:
        Path(output_path).write_text(generated.markdown, encoding="utf-8")
    if ctx.as_json:
        click.echo(json.dumps({
            "report_id": generated.report_id,
            "audience": generated.audience,
            "title": generated.title,
            "path": str(generated.path) if generated.path else None,
        }, sort_keys=True))
    else:
        click.echo(generated.markdown)
        if generated.path:
            click.echo(f"\nreport stored: {generated.path} (id {generated.report_id})",
                       err=True)


# -- simulators ---------------------------------------------------------------


@main.group()
def sim() -> None:
    """Bundled simulators."""


def _block_until_interrupt(stop_fn) -> None:
    done = threading.Event()

    def handler(signum, frame):
        done.set()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)
    try:
        done.wait()
    finally:
        stop_fn()


@sim.command("modbus")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=5002, show_default=True, type=int)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--water-plant", is_flag=True,
              help="Serve the water-plant profile instead of the testbed.")
@click.option("--digital", is_flag=True,
              help="Digital water-plant variant (discrete inputs + coils).")
@click.option("--silent-unknown-units", is_flag=True,
              help="Stay silent for unknown unit ids instead of gateway exceptions.")
@click.option("--profiles", "profiles_path", default=None,
              help="Load device profiles from a JSON config file.")
def sim_modbus(host, port, seed, water_plant, digital, silent_unknown_units,
               profiles_path) -> None:
    """Serve the bundled Modbus testbed (blocks until interrupted)."""
    ticker = None
    if profiles_path:
        profiles = load_profiles(profiles_path)
    elif water_plant:
        profiles = [build_water_plant_profile(digital=digital)]
        ticker = water_plant_ticker()
    else:
        profiles = build_default_testbed(seed)
    simulator = serve_modbus((host, port), profiles, seed=seed,
                             silent_unknown_units=silent_unknown_units,
                             ticker=ticker)
    names = ", ".join(f"{p.unit_id}:{p.name or 'device'}" for p in profiles)
    click.echo(f"modbus simulator on {host}:{simulator.port} (units {names})")
    _block_until_interrupt(simulator.stop)


@sim.command("opcua")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=4840, show_default=True, type=int)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--no-anonymous", is_flag=True, help="Disable anonymous sessions.")
@click.option("--user", "users", multiple=True,
              help="user:password pair (repeatable).")
@click.option("--model", "model_path", default=None,
              help="Serve a declarative model config (JSON) instead of the "
                   "bundled production line.")
def sim_opcua(host, port, seed, no_anonymous, users, model_path) -> None:
    """Serve the bundled production-line model (blocks until interrupted)."""
    parsed_users = {}
    for pair in users:
        name, _, password = pair.partition(":")
        if not name:
            raise click.UsageError(f"--user must be user:password, got {pair!r}")
        parsed_users[name] = password
    if model_path:
        model, auth_doc = load_model(model_path)
        auth = AuthConfig(
            anonymous=bool(auth_doc.get("anonymous", not no_anonymous)),
            users={**auth_doc.get("users", {}), **parsed_users},
        )
    else:
        model = build_production_line_model(seed=seed)
        auth = AuthConfig(anonymous=not no_anonymous, users=parsed_users)
    server = serve_opcua((host, port), model, auth)
    click.echo(f"opcua simulator at {server.endpoint_url}")
    _block_until_interrupt(server.stop)


# -- service ---------------------------------------------------------------


@main.command()
@click.option("--host", default=None, help="Bind host (default from config).")
@click.option("--port", default=None, type=int, help="Bind port (default from config).")
@pass_context
def serve(ctx: Context, host: str | None, port: int | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from icskit.service.app import create_app

    config = ctx.config
    uvicorn.run(create_app(config), host=host or config.host, port=port or config.port)


if __name__ == "__main__":  # pragma: no cover
    main()
