"""Assessment report generation.

The pipeline mirrors the evidence flow end to end: select recent items,
derive scan facts and protocol summaries, map mitigations, build an
audience-specific dataset, and render it — either through a configured
chat-completion endpoint or through the deterministic offline template.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

import httpx

from icskit.evidence.extract import (
    ModbusSummary,
    OpcUaSummary,
    TargetFacts,
    extract_modbus_summary,
    extract_opcua_summary,
    extract_scan_facts,
)
from icskit.evidence.mitigations import MitigationEntry, map_mitigations
from icskit.evidence.store import EvidenceStore, select_items

AUDIENCES = ("executive", "technical")
DEFAULT_MAX_ITEMS = 200
DEFAULT_MODEL = "gpt-4o-mini"

EXECUTIVE_INSTRUCTION = "Write an executive ICS/OT security report."
TECHNICAL_INSTRUCTION = "Write a structured technical ICS/OT report."

ENV_LLM_BASE_URL = "ICSKIT_LLM_BASE_URL"
ENV_LLM_MODEL = "ICSKIT_LLM_MODEL"
ENV_LLM_API_KEY = "ICSKIT_LLM_API_KEY"


class ReportError(Exception):
    """Base class for report generation failures."""


class EndpointUnreachable(ReportError):
    """LLM endpoint refused, timed out, or returned a server error."""


class AuthFailure(ReportError):
    """LLM endpoint rejected the configured credentials."""


class MalformedCompletion(ReportError):
    """LLM endpoint answered with an unusable body."""


@dataclass(frozen=True)
class ReportRequest:
    audience: str
    title: str = "ICS/OT Security Assessment"
    model: str = DEFAULT_MODEL
    max_items: int = DEFAULT_MAX_ITEMS

    def __post_init__(self) -> None:
        if self.audience not in AUDIENCES:
            raise ValueError(f"audience must be one of {AUDIENCES}, got {self.audience!r}")
        if self.max_items < 1:
            raise ValueError("max_items must be positive")


@dataclass(frozen=True)
class LlmConfig:
    """Chat-completion endpoint settings; base_url None selects offline mode."""

    base_url: str | None = None
    model: str = DEFAULT_MODEL
    api_key: str | None = None
    timeout_s: float = 60.0

    @property
    def mode(self) -> str:
        return "online" if self.base_url else "offline"

    @classmethod
    def from_env(cls) -> "LlmConfig":
        return cls(
            base_url=os.environ.get(ENV_LLM_BASE_URL) or None,
            model=os.environ.get(ENV_LLM_MODEL, DEFAULT_MODEL),
            api_key=os.environ.get(ENV_LLM_API_KEY) or None,
        )


@dataclass
class ReportDataset:
    """Audience-specific aggregation fed to the renderer."""

    audience: str
    data: dict
    item_ids: list[str] = field(default_factory=list)

    def serialize(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True, default=str)

    @property
    def mitigations(self) -> list[dict]:
        return self.data.get("mitigations", [])


def build_dataset(
    request: ReportRequest,
    facts: list[TargetFacts],
    modbus_summaries: list[ModbusSummary],
    opcua_summaries: list[OpcUaSummary],
    mitigations: list[MitigationEntry],
    newest_item_timestamp: str | None = None,
    item_count: int = 0,
) -> ReportDataset:
    """Aggregate facts per target for the requested audience.

    Executive datasets carry statistics only; technical ones add
    per-target details and raw interaction traces. Both embed the same
    consolidated mitigation list and per-fact provenance item ids.
    """
    executive = request.audience == "executive"
    targets = []
    item_ids: list[str] = []

    modbus_by_host: dict[str, list[ModbusSummary]] = {}
    for summary in modbus_summaries:
        modbus_by_host.setdefault(summary.target.rsplit(":", 1)[0], []).append(summary)
    opcua_by_host: dict[str, list[OpcUaSummary]] = {}
    for summary in opcua_summaries:
        opcua_by_host.setdefault(summary.host, []).append(summary)

    hosts = {f.host for f in facts} | set(modbus_by_host) | set(opcua_by_host)
    facts_by_host = {f.host: f for f in facts}

    for host in sorted(hosts):
        fact = facts_by_host.get(host)
        host_modbus = modbus_by_host.get(host, [])
        host_opcua = opcua_by_host.get(host, [])
        sources = list(fact.source_items) if fact else []
        for s in host_modbus + host_opcua:
            sources.extend(s.source_items)
        item_ids.extend(sources)

        if executive:
            entry = {
                "host": host,
                "open_port_count": len(fact.ports) if fact else 0,
                "services": sorted(fact.protocols) if fact else [],
                "modbus": {
                    "units_discovered": sum(len(s.unit_ids) for s in host_modbus),
                    "actions": sum(len(s.actions) for s in host_modbus),
                    "actions_succeeded": sum(s.successes for s in host_modbus),
                    "writes_succeeded": sum(
                        1
                        for s in host_modbus
                        for a in s.actions
                        if a.action == "write" and a.success
                    ),
                },
                "opcua": {
                    "endpoints": sum(len(s.endpoints) for s in host_opcua),
                    "anonymous_access": any(s.anonymous_access for s in host_opcua),
                    "variables_profiled": sum(s.variable_count for s in host_opcua),
                    "writes_succeeded": sum(
                        1
                        for s in host_opcua
                        for a in s.actions
                        if a.action == "write" and a.success
                    ),
                },
                "source_items": sorted(set(sources)),
            }
        else:
            entry = {
                "host": host,
                "ports": [
                    {"port": port, "service_tag": tag}
                    for port, tag in sorted(fact.ports.items())
                ]
                if fact
                else [],
                "modbus": [
                    {
                        "endpoint": s.target,
                        "unit_ids": s.unit_ids,
                        "accessed_ranges": s.ranges,
                        "traces": [
                            {
                                "action": a.action,
                                "unit_id": a.unit_id,
                                "dtype": a.dtype,
                                "address": a.address,
                                "count": a.count,
                                "success": a.success,
                                "written": a.written,
                                "before": a.before,
                                "after": a.after,
                                "error": a.error,
                                "item_id": a.item_id,
                            }
                            for a in s.actions
                        ],
                    }
                    for s in host_modbus
                ],
                "opcua": [
                    {
                        "endpoint_url": s.target,
                        "endpoints": s.endpoints,
                        "anonymous_access": s.anonymous_access,
                        "node_count": s.node_count,
                        "variable_count": s.variable_count,
                        "traces": [
                            {
                                "action": a.action,
                                "node_id": a.node_id,
                                "success": a.success,
                                "value": a.value,
                                "error": a.error,
                                "item_id": a.item_id,
                            }
                            for a in s.actions
                        ],
                    }
                    for s in host_opcua
                ],
                "source_items": sorted(set(sources)),
            }
        targets.append(entry)

    data = {
        "metadata": {
            "title": request.title,
            "audience": request.audience,
            "item_count": item_count,
            "newest_item_timestamp": newest_item_timestamp or "n/a",
        },
        "targets": targets,
        "mitigations": [m.to_dict() for m in mitigations],
    }
    return ReportDataset(audience=request.audience, data=data,
                         item_ids=sorted(set(item_ids)))


def build_prompt(title: str, audience: str, dataset: ReportDataset) -> str:
    """Compose the generation prompt: instruction, title, constraint, data."""
    instruction = EXECUTIVE_INSTRUCTION if audience == "executive" else TECHNICAL_INSTRUCTION
    serialized = dataset.serialize()
    return (
        f"{instruction}\n"
        f"\n"
        f"Report title: {title}\n"
        f"\n"
        "Use only the data supplied below; do not introduce findings, hosts, "
        "values, or recommendations that the data does not support. Render "
        "the report in Markdown and consolidate all mitigations into a "
        "single section.\n"
        f"\n"
        f"Dataset:\n{serialized}\n"
    )


@dataclass
class GeneratedReport:
    report_id: str
    markdown: str
    audience: str
    title: str
    path: Path | None = None


def generate_report(
    request: ReportRequest,
    dataset: ReportDataset,
    llm: LlmConfig | None = None,
    reports_dir: str | Path | None = None,
) -> GeneratedReport:
    """Render the dataset into a Markdown report.

    Online mode posts the prompt to the configured chat-completion
    endpoint and returns the completion verbatim; offline mode renders the
    deterministic template. The report is persisted under `reports_dir`
    only after generation succeeds — a transport failure leaves nothing
    behind.
    """
    llm = llm or LlmConfig.from_env()
    prompt = build_prompt(request.title, request.audience, dataset)
    if llm.mode == "online":
        markdown = _complete_online(llm, request, prompt)
    else:
        markdown = render_offline(request, dataset)

    report_id = hashlib.sha256(
        f"{request.audience}\x00{request.title}\x00{markdown}".encode("utf-8")
    ).hexdigest()[:16]
    report = GeneratedReport(
        report_id=report_id,
        markdown=markdown,
        audience=request.audience,
        title=request.title,
    )
    if reports_dir is not None:
        directory = Path(reports_dir)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{report_id}.md"
        tmp = path.with_suffix(".md.tmp")
        tmp.write_text(markdown, encoding="utf-8")
        tmp.replace(path)
        report.path = path
    return report


def _complete_online(llm: LlmConfig, request: ReportRequest, prompt: str) -> str:
    url = llm.base_url.rstrip("/") + "/chat/completions"
    headers = {}
    if llm.api_key:
        headers["Authorization"] = f"Bearer {llm.api_key}"
    body = {
        "model": request.model or llm.model,
        "messages": [{"role": "user", "content": prompt}],
    }
    try:
        response = httpx.post(url, json=body, headers=headers, timeout=llm.timeout_s)
    except httpx.HTTPError as e:
        raise EndpointUnreachable(f"cannot reach {url}: {e}") from e
    if response.status_code in (401, 403):
        raise AuthFailure(f"endpoint rejected credentials: HTTP {response.status_code}")
    if response.status_code >= 400:
        raise EndpointUnreachable(f"endpoint returned HTTP {response.status_code}")
    try:
        doc = response.json()
        content = doc["choices"][0]["message"]["content"]
    except (ValueError, LookupError, TypeError) as e:
        raise MalformedCompletion(f"unusable completion body: {e}") from e
    if not isinstance(content, str) or not content:
        raise MalformedCompletion("completion content is empty or not text")
    return content


def render_offline(request: ReportRequest, dataset: ReportDataset) -> str:
    """Deterministic template renderer; same structure as the LLM output
    contract (summary, per-target sections, one mitigation section)."""
    meta = dataset.data["metadata"]
    targets = dataset.data["targets"]
    mitigations = dataset.data["mitigations"]
    executive = request.audience == "executive"

    lines = [
        "---",
        f"title: {meta['title']}",
        f"audience: {meta['audience']}",
        f"generated: {meta['newest_item_timestamp']}",
        f"items: {meta['item_count']}",
        "---",
        "",
        f"# {meta['title']}",
        "",
        "## Engagement Summary",
        "",
        f"- Targets assessed: {len(targets)}",
        f"- Evidence items analyzed: {meta['item_count']}",
        f"- Mitigations recommended: {len(mitigations)}",
        "",
    ]

    for target in targets:
        lines.append(f"## Target {target['host']}")
        lines.append("")
        if executive:
            lines.append(f"- Open ports observed: {target['open_port_count']}")
            services = ", ".join(target["services"]) or "none identified"
            lines.append(f"- Industrial services: {services}")
            modbus = target["modbus"]
            lines.append(
                f"- Modbus exposure: {modbus['units_discovered']} unit id(s) "
                f"discovered, {modbus['actions_succeeded']}/{modbus['actions']} "
                f"interactions succeeded, {modbus['writes_succeeded']} write(s) "
                "accepted"
            )
            opcua = target["opcua"]
            lines.append(
                f"- OPC UA exposure: {opcua['endpoints']} endpoint(s), anonymous "
                f"access {'confirmed' if opcua['anonymous_access'] else 'not observed'}, "
                f"{opcua['writes_succeeded']} write(s) accepted"
            )
        else:
            if target["ports"]:
                lines.append("### Open Ports")
                lines.append("")
                lines.append("| Port | Service |")
                lines.append("| --- | --- |")
                for entry in target["ports"]:
                    lines.append(f"| {entry['port']} | {entry['service_tag']} |")
                lines.append("")
            for modbus in target["modbus"]:
                lines.append(f"### Modbus Endpoint {modbus['endpoint']}")
                lines.append("")
                lines.append(f"- Active unit ids: {modbus['unit_ids'] or 'none'}")
                if modbus["accessed_ranges"]:
                    ranges = ", ".join(
                        f"{r['dtype']} {r['start']}-{r['end']}"
                        for r in modbus["accessed_ranges"]
                    )
                    lines.append(f"- Accessed ranges: {ranges}")
                if modbus["traces"]:
                    lines.append("- Interaction trace:")
                    for trace in modbus["traces"]:
                        outcome = "ok" if trace["success"] else f"failed ({trace['error']})"
                        detail = (
                            f"unit {trace['unit_id']}, {trace['dtype']} "
                            f"@{trace['address']} x{trace['count']}"
                        )
                        extra = ""
                        if trace["action"] == "write":
                            extra = f", wrote {trace['written']}"
                            if trace["after"] is not None:
                                extra += f", readback {trace['after']}"
                        lines.append(
                            f"    - [{trace['item_id']}] {trace['action']} "
                            f"{detail}{extra}: {outcome}"
                        )
                lines.append("")
            for opcua in target["opcua"]:
                lines.append(f"### OPC UA Endpoint {opcua['endpoint_url']}")
                lines.append("")
                lines.append(
                    f"- Anonymous access: "
                    f"{'yes' if opcua['anonymous_access'] else 'no'}"
                )
                for ep in opcua["endpoints"]:
                    lines.append(
                        f"- Endpoint policy {ep.get('security_policy')}, mode "
                        f"{ep.get('security_mode')}, tokens "
                        f"{sorted(ep.get('token_types', []))}"
                    )
                if opcua["node_count"]:
                    lines.append(f"- Address-space nodes browsed: {opcua['node_count']}")
                if opcua["variable_count"]:
                    lines.append(f"- Variables profiled: {opcua['variable_count']}")
                if opcua["traces"]:
                    lines.append("- Interaction trace:")
                    for trace in opcua["traces"]:
                        outcome = "ok" if trace["success"] else f"failed ({trace['error']})"
                        value = f" value {trace['value']}" if trace["value"] is not None else ""
                        lines.append(
                            f"    - [{trace['item_id']}] {trace['action']} "
                            f"{trace['node_id']}{value}: {outcome}"
                        )
                lines.append("")
        if executive:
            lines.append("")

    lines.append("## Consolidated Mitigations")
    lines.append("")
    if mitigations:
        for m in mitigations:
            lines.append(f"- **{m['id']} {m['name']}**: {m['rationale']}")
    else:
        lines.append("- No mitigation-relevant findings were recorded.")
    lines.append("")
    return "\n".join(lines)


def run_report_pipeline(
    store: EvidenceStore,
    request: ReportRequest,
    llm: LlmConfig | None = None,
    reports_dir: str | Path | None = None,
) -> GeneratedReport:
    """End-to-end generation from the inbox: select, derive, map, build,
    render, persist."""
    items = select_items(store, request.max_items)
    facts = extract_scan_facts(items)
    modbus_summaries = extract_modbus_summary(items)
    opcua_summaries = extract_opcua_summary(items)
    mitigations = map_mitigations(facts, modbus_summaries, opcua_summaries)
    newest = items[-1].timestamp if items else None
    dataset = build_dataset(
        request,
        facts,
        modbus_summaries,
        opcua_summaries,
        mitigations,
        newest_item_timestamp=newest,
        item_count=len(items),
    )
    return generate_report(request, dataset, llm=llm, reports_dir=reports_dir)
