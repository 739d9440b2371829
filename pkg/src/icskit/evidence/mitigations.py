"""Map observed findings to ATT&CK for ICS mitigation identifiers.

The shipped table covers the finding patterns this toolkit can produce;
ids and names come from the published ATT&CK for ICS mitigation catalog.
"""

from __future__ import annotations

from dataclasses import dataclass

from icskit.evidence.extract import ModbusSummary, OpcUaSummary, TargetFacts

MITIGATION_CATALOG = {
    "M0800": "Authorization Enforcement",
    "M0801": "Access Management",
    "M0802": "Communication Authenticity",
    "M0807": "Network Allowlists",
    "M0813": "Software Process and Device Authentication",
    "M0930": "Network Segmentation",
    "M0932": "Multi-factor Authentication",
    "M0937": "Filter Network Traffic",
    "M0942": "Disable or Remove Feature or Program",
}

# finding pattern -> mitigation ids (1-3 each)
_PATTERN_MITIGATIONS = {
    "exposed_modbus_service": ("M0930", "M0937"),
    "unauthenticated_modbus_read": ("M0801", "M0930"),
    "unauthenticated_modbus_write": ("M0802", "M0800"),
    "anonymous_opcua_session": ("M0801", "M0813"),
    "opcua_write": ("M0800", "M0802"),
    "open_non_ics_port": ("M0930", "M0942"),
}


@dataclass(frozen=True)
class MitigationEntry:
    id: str
    name: str
    rationale: str

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "rationale": self.rationale}


def map_mitigations(
    facts: list[TargetFacts],
    modbus_summaries: list[ModbusSummary],
    opcua_summaries: list[OpcUaSummary],
) -> list[MitigationEntry]:
    """Apply the pattern table and consolidate into one id-unique list.

    The first finding that triggers a pattern supplies the rationale;
    output order is stable (sorted by id) so prompts are reproducible.
    """
    triggered: dict[str, str] = {}  # pattern -> rationale

    for fact in facts:
        for port, tag in sorted(fact.ports.items()):
            if tag == "modbus":
                triggered.setdefault(
                    "exposed_modbus_service",
                    f"A Modbus service is reachable on {fact.host}:{port}.",
                )
            elif tag == "unknown":
                triggered.setdefault(
                    "open_non_ics_port",
                    f"An unidentified service is open on {fact.host}:{port}.",
                )

    for summary in modbus_summaries:
        if summary.unit_ids:
            triggered.setdefault(
                "exposed_modbus_service",
                f"Modbus unit ids {summary.unit_ids} answered probes on {summary.target}.",
            )
        for action in summary.actions:
            if not action.success:
                continue
            if action.action in ("read", "enumerate", "scan_range"):
                triggered.setdefault(
                    "unauthenticated_modbus_read",
                    f"Process values on {summary.target} were read without any "
                    f"authentication ({action.action} of {action.dtype}).",
                )
            elif action.action == "write":
                triggered.setdefault(
                    "unauthenticated_modbus_write",
                    f"A write to {summary.target} (unit {action.unit_id}, "
                    f"{action.dtype} {action.address}) was accepted without "
                    "authentication.",
                )

    for summary in opcua_summaries:
        if summary.anonymous_access:
            triggered.setdefault(
                "anonymous_opcua_session",
                f"{summary.target} accepted an anonymous session under security "
                "policy None.",
            )
        for action in summary.actions:
            if action.action == "write" and action.success:
                triggered.setdefault(
                    "opcua_write",
                    f"Node {action.node_id} on {summary.target} accepted a value "
                    "write from an unauthenticated client.",
                )

    entries: dict[str, MitigationEntry] = {}
    for pattern, rationale in triggered.items():
        for mid in _PATTERN_MITIGATIONS[pattern]:
            if mid not in entries:
                entries[mid] = MitigationEntry(
                    id=mid, name=MITIGATION_CATALOG[mid], rationale=rationale
                )
    return [entries[mid] for mid in sorted(entries)]
