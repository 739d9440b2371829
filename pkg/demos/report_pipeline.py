#!/usr/bin/env python3
"""Walkthrough: from live tool runs to a rendered assessment report.

Runs a miniature engagement against the bundled simulators with evidence
storage enabled, then generates the technical report offline and prints
it. Point ICSKIT_LLM_BASE_URL at a chat-completion endpoint to have a
model write the prose instead.
"""

import tempfile
from pathlib import Path

from icskit import ops
from icskit.evidence import EvidenceStore, LlmConfig, ReportRequest, run_report_pipeline
from icskit.opcua import build_production_line_model, serve_opcua
from icskit.simulators import build_water_plant_profile, serve_modbus


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="icskit-demo-"))
    store = EvidenceStore(workdir / "evidence.jsonl")

    water = serve_modbus(("127.0.0.1", 0), [build_water_plant_profile()])
    plant = serve_opcua(("127.0.0.1", 0), build_production_line_model())
    url = f"opc.tcp://127.0.0.1:{plant.port}/server/"

    steps = [
        ("scan", "scan", {"hosts": "127.0.0.1",
                          "ports": f"{water.port},{plant.port}"}),
        ("modbus", "write", {"host": "127.0.0.1", "port": water.port,
                             "unit_id": 1, "type": "holding_register",
                             "address": 0, "values": [500], "read_back": True}),
        ("opcua", "endpoints", {"endpoint_url": url}),
        ("opcua", "write", {"endpoint_url": url, "node_id": "ns=2;i=20",
                            "value": {"type": "INT32", "value": 1200},
                            "read_back": True}),
    ]
    for category, action, params in steps:
        outcome = ops.execute_tool(category, action, params,
                                   evidence_store=store, store_evidence=True)
        print(f"[{outcome.evidence_id}] {category}/{action}: "
              f"{ops.summarize_output(outcome)}")

    print(f"\nevidence inbox: {store.count()} items at {store.path}\n")

    request = ReportRequest(audience="technical", title="Lab Engagement Report")
    report = run_report_pipeline(store, request, llm=LlmConfig(),
                                 reports_dir=workdir / "reports")
    print(report.markdown)
    print(f"\nstored at {report.path}")

    water.stop()
    plant.stop()


if __name__ == "__main__":
    main()
