"""Derive per-target facts and protocol summaries from evidence items.

Extractors are defensive: a malformed item is skipped (and optionally
recorded in a caller-supplied sink) rather than failing the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from urllib.parse import urlparse

from icskit.evidence.store import EvidenceItem

logger = logging.getLogger(__name__)


@dataclass
class TargetFacts:
    """Scan-derived view of one host."""

    host: str
    ports: dict[int, str] = field(default_factory=dict)  # port -> service tag
    protocols: set[str] = field(default_factory=set)
    source_items: list[str] = field(default_factory=list)


@dataclass
class ModbusAction:
    action: str
    unit_id: int | None
    dtype: str | None
    address: int | None
    count: int | None
    success: bool
    item_id: str
    written: list | None = None
    before: list | None = None
    after: list | None = None
    error: str | None = None


@dataclass
class ModbusSummary:
    """Aggregated Modbus interaction record for one endpoint."""

    target: str  # host:port
    unit_ids: list[int] = field(default_factory=list)
    ranges: list[dict] = field(default_factory=list)  # {dtype, start, end}
    actions: list[ModbusAction] = field(default_factory=list)
    source_items: list[str] = field(default_factory=list)

    @property
    def successes(self) -> int:
        return sum(1 for a in self.actions if a.success)


@dataclass
class OpcUaAction:
    action: str
    node_id: str | None
    success: bool
    item_id: str
    value: object = None
    error: str | None = None


@dataclass
class OpcUaSummary:
    """Aggregated OPC UA interaction record for one endpoint URL."""

    target: str  # endpoint url
    endpoints: list[dict] = field(default_factory=list)
    anonymous_access: bool = False
    node_count: int = 0
    variable_count: int = 0
    actions: list[OpcUaAction] = field(default_factory=list)
    source_items: list[str] = field(default_factory=list)

    @property
    def host(self) -> str:
        return urlparse(self.target).hostname or self.target


def _skip(sink: list | None, item: EvidenceItem, reason: str) -> None:
    logger.debug("skipping evidence item %s: %s", item.item_id, reason)
    if sink is not None:
        sink.append((item.item_id, reason))


def extract_scan_facts(
    items: list[EvidenceItem], skipped: list | None = None
) -> list[TargetFacts]:
    """Group scan findings by host, merging duplicates."""
    facts: dict[str, TargetFacts] = {}
    for item in items:
        if item.category != "scan":
            continue
        output = item.output if isinstance(item.output, dict) else None
        findings = output.get("findings") if output else None
        if not isinstance(findings, list):
            _skip(skipped, item, "scan item lacks a findings list")
            continue
        for finding in findings:
            if not isinstance(finding, dict) or "host" not in finding or "port" not in finding:
                _skip(skipped, item, "finding lacks host/port")
                continue
            host = str(finding["host"])
            fact = facts.setdefault(host, TargetFacts(host=host))
            try:
                port = int(finding["port"])
            except (TypeError, ValueError):
                _skip(skipped, item, f"bad port in finding for {host}")
                continue
            tag = str(finding.get("service_tag", "unknown"))
            # A classified tag wins over an earlier unknown for the same port.
            if fact.ports.get(port, "unknown") == "unknown":
                fact.ports[port] = tag
            if tag != "unknown":
                fact.protocols.add(tag)
            if item.item_id not in fact.source_items:
                fact.source_items.append(item.item_id)
    return list(facts.values())


def extract_modbus_summary(
    items: list[EvidenceItem], skipped: list | None = None
) -> list[ModbusSummary]:
    """Aggregate unit scans, enumerations, reads, and writes per endpoint."""
    summaries: dict[str, ModbusSummary] = {}
    for item in items:
        if item.category != "modbus":
            continue
        params = item.params if isinstance(item.params, dict) else {}
        host = params.get("host")
        if not host:
            _skip(skipped, item, "modbus item lacks a host")
            continue
        target = f"{host}:{params.get('port', 502)}"
        summary = summaries.setdefault(target, ModbusSummary(target=target))
        summary.source_items.append(item.item_id)
        output = item.output if isinstance(item.output, dict) else {}
        ok = bool(output.get("ok", False))
        error = None
        if not ok:
            err = output.get("error")
            error = err.get("message") if isinstance(err, dict) else (str(err) if err else None)
        action = str(params.get("action", "unknown"))

        if action == "scan_units":
            for uid in output.get("active_units", []) or []:
                try:
                    uid = int(uid)
                except (TypeError, ValueError):
                    continue
                if uid not in summary.unit_ids:
                    summary.unit_ids.append(uid)
        elif action in ("read", "write", "enumerate", "scan_range"):
            start = params.get("address", params.get("start"))
            count = params.get("count")
            if count is None and params.get("end") is not None and start is not None:
                count = int(params["end"]) - int(start) + 1
            dtype = params.get("type")
            if start is not None and count is not None and dtype:
                entry = {"dtype": dtype, "start": int(start),
                         "end": int(start) + int(count) - 1}
                if entry not in summary.ranges:
                    summary.ranges.append(entry)
            summary.actions.append(
                ModbusAction(
                    action=action,
                    unit_id=params.get("unit_id"),
                    dtype=dtype,
                    address=int(start) if start is not None else None,
                    count=int(count) if count is not None else None,
                    success=ok,
                    item_id=item.item_id,
                    written=params.get("values") if action == "write" else None,
                    before=output.get("before"),
                    after=output.get("readback"),
                    error=error,
                )
            )
        else:
            _skip(skipped, item, f"unrecognized modbus action {action!r}")
    for summary in summaries.values():
        summary.unit_ids.sort()
    return list(summaries.values())


def extract_opcua_summary(
    items: list[EvidenceItem], skipped: list | None = None
) -> list[OpcUaSummary]:
    """Aggregate endpoint listings, browses, and node operations per URL."""
    summaries: dict[str, OpcUaSummary] = {}
    for item in items:
        if item.category != "opcua":
            continue
        params = item.params if isinstance(item.params, dict) else {}
        url = params.get("endpoint_url")
        if not url:
            _skip(skipped, item, "opcua item lacks an endpoint url")
            continue
        summary = summaries.setdefault(url, OpcUaSummary(target=url))
        summary.source_items.append(item.item_id)
        output = item.output if isinstance(item.output, dict) else {}
        ok = bool(output.get("ok", False))
        error = None
        if not ok:
            err = output.get("error")
            error = err.get("message") if isinstance(err, dict) else (str(err) if err else None)
        action = str(params.get("action", "unknown"))

        if action == "endpoints":
            for ep in output.get("endpoints", []) or []:
                if not isinstance(ep, dict):
                    continue
                if ep not in summary.endpoints:
                    summary.endpoints.append(ep)
                if "Anonymous" in (ep.get("token_types") or []):
                    summary.anonymous_access = True
        elif action == "browse":
            summary.node_count = max(summary.node_count,
                                     int(output.get("node_count", 0) or 0))
        elif action == "enumerate":
            variables = output.get("variables")
            if isinstance(variables, list):
                summary.variable_count = max(summary.variable_count, len(variables))
        elif action in ("read", "write"):
            if params.get("auth", "anonymous") == "anonymous" and ok:
                summary.anonymous_access = True
            summary.actions.append(
                OpcUaAction(
                    action=action,
                    node_id=params.get("node_id"),
                    success=ok,
                    item_id=item.item_id,
                    value=params.get("value") if action == "write"
                    else output.get("value"),
                    error=error,
                )
            )
        else:
            _skip(skipped, item, f"unrecognized opcua action {action!r}")
    return list(summaries.values())
