"""Tool operations shared by the HTTP service and the CLI.

Every action takes validated parameters, runs the underlying module, and
returns one JSON-compatible output record. The service embeds that record
in its response body and the CLI prints it in structured mode, so the two
surfaces stay record-equivalent by construction. Failures are folded into
the record ({"ok": false, "error": {...}}) and classified for transport
mapping.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from icskit import modbus, netscan
from icskit import opcua
from icskit.evidence.store import EvidenceStore
from icskit.modbus.client import (
    DEFAULT_SCAN_CONCURRENCY,
    ConnectionParams,
    ModbusDataType,
)
from icskit.opcua.types import NodeId, OBJECTS_NODE, VariantType, VariantValue

# How a failure should surface at the transport layer:
#   validation  -> caller mistake (HTTP 400 / exit 2)
#   unreachable -> target did not answer (HTTP 502 / exit 1)
#   tool        -> target answered negatively (HTTP 200 error record / exit 1)
UNREACHABLE_ERRORS = (
    modbus.Timeout,
    modbus.ConnectionRefused,
    opcua.Timeout,
    opcua.ConnectionRefused,
    opcua.HandshakeRejected,
)
TOOL_ERRORS = (
    modbus.ExceptionResponse,
    modbus.NotWritable,
    modbus.FrameError,
    opcua.AuthRejected,
    opcua.NodeUnknown,
    opcua.AccessDenied,
    opcua.TypeMismatch,
    opcua.ServiceFault,
    opcua.SessionClosed,
    opcua.Unsupported,
)
VALIDATION_ERRORS = (
    netscan.ScanSpecError,
    opcua.InvalidEndpointUrl,
    ValueError,
    TypeError,
)


@dataclass
class ToolOutcome:
    category: str
    action: str
    params: dict
    output: dict
    ok: bool
    error_kind: str | None = None  # "validation" | "unreachable" | "tool"
    evidence_id: str | None = None


def _error_output(exc: Exception) -> dict:
    error: dict = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, modbus.ExceptionResponse):
        error["code"] = exc.code
    return {"ok": False, "error": error}


def _classify(exc: Exception) -> str:
    if isinstance(exc, UNREACHABLE_ERRORS):
        return "unreachable"
    if isinstance(exc, TOOL_ERRORS):
        return "tool"
    if isinstance(exc, VALIDATION_ERRORS):
        return "validation"
    raise exc


def execute_tool(
    category: str,
    action: str,
    params: dict,
    evidence_store: EvidenceStore | None = None,
    store_evidence: bool = False,
) -> ToolOutcome:
    """Run one tool action and optionally append the evidence item."""
    runner = _ACTIONS.get((category, action))
    if runner is None:
        raise ValueError(f"unknown action {category}/{action}")
    try:
        output = runner(params)
        ok = True
        error_kind = None
    except Exception as exc:  # noqa: BLE001 - folded into the record
        error_kind = _classify(exc)
        output = _error_output(exc)
        ok = False
    outcome = ToolOutcome(
        category=category,
        action=action,
        params=params,
        output=output,
        ok=ok,
        error_kind=error_kind,
    )
    if store_evidence and evidence_store is not None and error_kind != "validation":
        record_params = dict(params)
        record_params["action"] = action
        outcome.evidence_id = evidence_store.append(category, record_params, output)
    return outcome


# -- scan -------------------------------------------------------------------


def _scan(params: dict) -> dict:
    target = netscan.parse_targets(params["hosts"], params["ports"])
    config = netscan.ScanConfig(
        timeout_ms=int(params.get("timeout_ms", netscan.DEFAULT_CONNECT_TIMEOUT_MS)),
        concurrency=int(params.get("concurrency", netscan.DEFAULT_CONCURRENCY)),
        retries=int(params.get("retries", 0)),
        classify=bool(params.get("classify", True)),
    )
    findings = netscan.run_scan(target, config)
    return {
        "ok": True,
        "target": {"hosts": list(target.hosts), "ports": list(target.ports)},
        "findings": [f.to_dict() for f in findings],
        "open_count": len(findings),
    }


# -- modbus -------------------------------------------------------------------


def _conn(params: dict) -> ConnectionParams:
    return ConnectionParams(
        host=params["host"],
        port=int(params.get("port", 502)),
        unit_id=int(params.get("unit_id", 1)),
        timeout_ms=int(params.get("timeout_ms", 1000)),
        retries=int(params.get("retries", 1)),
    )


def _dtype(params: dict) -> ModbusDataType:
    raw = str(params.get("type", "holding_register")).lower()
    try:
        return ModbusDataType(raw)
    except ValueError as e:
        names = ", ".join(d.value for d in ModbusDataType)
        raise ValueError(f"type must be one of {names}, got {raw!r}") from e


def _modbus_read(params: dict) -> dict:
    dtype = _dtype(params)
    values = modbus.read_values(
        _conn(params), dtype, int(params["address"]), int(params.get("count", 1))
    )
    return {"ok": True, "values": values}


def _modbus_write(params: dict) -> dict:
    dtype = _dtype(params)
    address = int(params["address"])
    raw_values = params["values"]
    if not isinstance(raw_values, list) or not raw_values:
        raise ValueError("values must be a non-empty list")
    values = [bool(v) for v in raw_values] if dtype.is_bit else [int(v) for v in raw_values]
    conn = _conn(params)
    output: dict = {"ok": True}
    read_back = bool(params.get("read_back", False))
    if read_back:
        output["before"] = modbus.read_values(conn, dtype, address, len(values))
    ack = modbus.write_values(conn, dtype, address, values)
    output["address"] = ack.address
    output["count"] = ack.count
    if read_back:
        output["readback"] = modbus.read_values(conn, dtype, address, len(values))
    return output


def _modbus_enumerate(params: dict) -> dict:
    dtype = _dtype(params)
    start, end = int(params["start"]), int(params["end"])
    values = modbus.enumerate_addresses(_conn(params), dtype, start, end)
    return {
        "ok": True,
        "start": start,
        "end": end,
        "present": len(values),
        "absent": (end - start + 1) - len(values),
        "values": {str(a): v for a, v in values.items()},
    }


def _modbus_scan_units(params: dict) -> dict:
    start, end = int(params.get("start", 1)), int(params.get("end", 254))
    if start > end:
        raise ValueError(f"unit id range {start}-{end} is reversed")
    report = modbus.scan_unit_ids(
        _conn(params),
        range(start, end + 1),
        concurrency=int(params.get("concurrency", DEFAULT_SCAN_CONCURRENCY)),
    )
    units = {
        str(record.unit_id): {
            "active": record.active,
            "kinds": sorted(k.value for k in record.kinds),
            "offsets": {k.value: offs for k, offs in sorted(
                record.responding.items(), key=lambda kv: kv[0].value)},
        }
        for record in report.records.values()
        if record.active
    }
    return {"ok": True, "active_units": report.active_units, "units": units}


def _modbus_scan_range(params: dict) -> dict:
    dtype = _dtype(params)
    report = modbus.scan_register_range(
        _conn(params),
        dtype,
        int(params["start"]),
        int(params["end"]),
        chunk_size=int(params.get("chunk_size", 1000)),
    )
    return {
        "ok": True,
        "chunks": [
            {
                "start_address": c.start_address,
                "requested_count": c.requested_count,
                "status": c.status,
                "values": c.values,
            }
            for c in report.chunks
        ],
    }


# -- opcua -------------------------------------------------------------------


def _auth(params: dict) -> tuple[str, str] | None:
    auth = params.get("auth")
    if not auth or auth == "anonymous":
        return None
    if isinstance(auth, dict) and "username" in auth:
        return str(auth["username"]), str(auth.get("password", ""))
    raise ValueError("auth must be omitted, 'anonymous', or {username, password}")


def _variant_to_dict(value: VariantValue | None) -> dict | None:
    if value is None:
        return None
    v = value.value
    if value.type is VariantType.TIMESTAMP and isinstance(v, datetime):
        v = v.isoformat()
    return {"type": value.type.name, "value": v}


def _variant_from_dict(doc: dict) -> VariantValue:
    if not isinstance(doc, dict) or "type" not in doc or "value" not in doc:
        raise ValueError("value must be {type, value}")
    try:
        tag = VariantType[str(doc["type"]).upper()]
    except KeyError as e:
        names = ", ".join(t.name for t in VariantType)
        raise ValueError(f"value type must be one of {names}") from e
    raw = doc["value"]
    if tag is VariantType.BOOLEAN:
        return VariantValue.boolean(bool(raw))
    if tag is VariantType.INT32:
        return VariantValue.int32(int(raw))
    if tag is VariantType.DOUBLE:
        return VariantValue.double(float(raw))
    if tag is VariantType.STRING:
        return VariantValue.string(str(raw))
    return VariantValue.timestamp(datetime.fromisoformat(str(raw)))


def _opcua_endpoints(params: dict) -> dict:
    infos = opcua.get_endpoints(params["endpoint_url"])
    return {
        "ok": True,
        "endpoints": [
            {
                "url": e.url,
                "security_policy": e.security_policy,
                "security_mode": e.security_mode,
                "token_types": sorted(e.token_types),
            }
            for e in infos
        ],
    }


def _descriptor_to_dict(descriptor) -> dict:
    return {
        "node_id": descriptor.node_id.render(),
        "browse_name": descriptor.browse_name,
        "node_class": descriptor.node_class.name,
        "namespace_index": descriptor.namespace_index,
        "children": [_descriptor_to_dict(c) for c in descriptor.children],
    }


def _opcua_browse(params: dict) -> dict:
    session = opcua.establish_session(params["endpoint_url"], auth=_auth(params))
    try:
        root = NodeId.parse(params["root"]) if params.get("root") else OBJECTS_NODE
        tree = opcua.browse_nodes(
            session,
            root=root,
            depth=int(params.get("depth", 5)),
            max_nodes=int(params.get("max_nodes", 500)),
        )
    finally:
        opcua.close_session(session)
    return {
        "ok": True,
        "tree": _descriptor_to_dict(tree.root),
        "node_count": tree.node_count,
        "truncated": tree.truncated,
    }


def _opcua_enumerate(params: dict) -> dict:
    session = opcua.establish_session(params["endpoint_url"], auth=_auth(params))
    try:
        profiles = opcua.enumerate_variables(session, int(params["namespace_index"]))
    finally:
        opcua.close_session(session)
    return {
        "ok": True,
        "variables": [
            {
                "node_id": p.node_id.render(),
                "display_name": p.display_name,
                "data_type": p.data_type.name if p.data_type else None,
                "readable": p.access.readable,
                "writable": p.access.writable,
                "value": _variant_to_dict(p.current_value),
            }
            for p in profiles
        ],
    }


def _opcua_read(params: dict) -> dict:
    session = opcua.establish_session(params["endpoint_url"], auth=_auth(params))
    try:
        value = opcua.read_node(session, NodeId.parse(params["node_id"]))
    finally:
        opcua.close_session(session)
    return {"ok": True, "node_id": params["node_id"], "value": _variant_to_dict(value)}


def _opcua_write(params: dict) -> dict:
    node_id = NodeId.parse(params["node_id"])
    value = _variant_from_dict(params["value"])
    session = opcua.establish_session(params["endpoint_url"], auth=_auth(params))
    try:
        opcua.write_node(session, node_id, value)
        output: dict = {"ok": True, "node_id": params["node_id"]}
        if params.get("read_back", False):
            output["readback"] = _variant_to_dict(opcua.read_node(session, node_id))
    finally:
        opcua.close_session(session)
    return output


_ACTIONS = {
    ("scan", "scan"): _scan,
    ("modbus", "read"): _modbus_read,
    ("modbus", "write"): _modbus_write,
    ("modbus", "enumerate"): _modbus_enumerate,
    ("modbus", "scan_units"): _modbus_scan_units,
    ("modbus", "scan_range"): _modbus_scan_range,
    ("opcua", "endpoints"): _opcua_endpoints,
    ("opcua", "browse"): _opcua_browse,
    ("opcua", "enumerate"): _opcua_enumerate,
    ("opcua", "read"): _opcua_read,
    ("opcua", "write"): _opcua_write,
}


def summarize_output(outcome: ToolOutcome) -> str:
    """One-line human rendering of a tool outcome."""
    output = outcome.output
    if not outcome.ok:
        error = output.get("error", {})
        return f"{outcome.category}/{outcome.action} failed: {error.get('type')}: " \
               f"{error.get('message')}"
    if outcome.action == "scan":
        return f"{output['open_count']} open port(s) found"
    if outcome.action == "read":
        values = output.get("values", output.get("value"))
        return f"read -> {values}"
    if outcome.action == "write":
        extra = f", readback {output['readback']}" if "readback" in output else ""
        return f"write acknowledged{extra}"
    if outcome.action == "enumerate":
        if outcome.category == "modbus":
            return f"{output['present']} readable address(es), {output['absent']} absent"
        return f"{len(output['variables'])} variable(s) profiled"
    if outcome.action == "scan_units":
        return f"active unit ids: {output['active_units']}"
    if outcome.action == "scan_range":
        states = [c["status"] for c in output["chunks"]]
        return f"{len(states)} chunk(s): {states}"
    if outcome.action == "endpoints":
        return f"{len(output['endpoints'])} endpoint(s) advertised"
    if outcome.action == "browse":
        return f"{output['node_count']} node(s) browsed" + (
            " (truncated)" if output["truncated"] else ""
        )
    return "ok"
