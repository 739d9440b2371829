"""Evidence inbox, fact extraction, mitigation mapping, and reporting."""

from icskit.evidence.store import (
    CATEGORIES,
    EvidenceItem,
    EvidenceStore,
    StorageFailure,
    select_items,
)
from icskit.evidence.extract import (
    ModbusSummary,
    OpcUaSummary,
    TargetFacts,
    extract_modbus_summary,
    extract_opcua_summary,
    extract_scan_facts,
)
from icskit.evidence.mitigations import (
    MITIGATION_CATALOG,
    MitigationEntry,
    map_mitigations,
)
from icskit.evidence.report import (
    AuthFailure,
    EndpointUnreachable,
    GeneratedReport,
    LlmConfig,
    MalformedCompletion,
    ReportDataset,
    ReportError,
    ReportRequest,
    build_dataset,
    build_prompt,
    generate_report,
    run_report_pipeline,
)

__all__ = [
    "AuthFailure",
    "CATEGORIES",
    "EndpointUnreachable",
    "EvidenceItem",
    "EvidenceStore",
    "GeneratedReport",
    "LlmConfig",
    "MITIGATION_CATALOG",
    "MalformedCompletion",
    "MitigationEntry",
    "ModbusSummary",
    "OpcUaSummary",
    "ReportDataset",
    "ReportError",
    "ReportRequest",
    "StorageFailure",
    "TargetFacts",
    "build_dataset",
    "build_prompt",
    "extract_modbus_summary",
    "extract_opcua_summary",
    "extract_scan_facts",
    "generate_report",
    "map_mitigations",
    "run_report_pipeline",
    "select_items",
]
