"""HTTP service routes, CLI behavior, and CLI/API record equivalence."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from icskit.cli import main as cli_main
from icskit.evidence.report import LlmConfig
from icskit.service.app import create_app
from icskit.service.config import ServiceConfig


@pytest.fixture
def service(tmp_path):
    config = ServiceConfig(
        evidence_path=tmp_path / "service-ev.jsonl",
        reports_dir=tmp_path / "reports",
        llm=LlmConfig(),
        static_dir=None,
    )
    app = create_app(config)
    with TestClient(app) as client:
        yield client, config


@pytest.fixture
def runner(tmp_path, monkeypatch):
    monkeypatch.setenv("ICSKIT_EVIDENCE_PATH", str(tmp_path / "cli-ev.jsonl"))
    monkeypatch.setenv("ICSKIT_REPORTS_DIR", str(tmp_path / "cli-reports"))
    monkeypatch.delenv("ICSKIT_LLM_BASE_URL", raising=False)
    return CliRunner()


class TestHealth:
    def test_fresh_start_ok(self, service):
        client, _ = service
        body = client.get("/healthz").json()
        assert body["status"] == "ok"
        assert body["llm_mode"] == "offline"

    def test_version_matches_package(self, service):
        import icskit

        client, _ = service
        assert client.get("/healthz").json()["version"] == icskit.__version__


class TestToolRoutes:
    def test_water_plant_write_with_readback(self, service, water_sim):
        client, _ = service
        response = client.post("/api/modbus/write", json={
            "host": "127.0.0.1", "port": water_sim.port, "unit_id": 1,
            "address": 0, "values": [500], "read_back": True,
            "store_evidence": True,
        })
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["result"]["readback"] == [5]
        assert body["evidence_id"]

    def test_malformed_cidr_400_with_detail(self, service):
        client, _ = service
        response = client.post("/api/scan", json={"hosts": "10.0.0.1/33",
                                                  "ports": "1"})
        assert response.status_code == 400
        assert response.json()["result"]["error"]["type"] == "InvalidHostSpec"

    def test_missing_field_400_with_field_message(self, service):
        client, _ = service
        response = client.post("/api/scan", json={"hosts": "127.0.0.1"})
        assert response.status_code == 400
        details = response.json()["error"]["details"]
        assert any(d["field"] == "ports" for d in details)

    def test_browse_matches_bundled_model(self, service, opcua_sim):
        client, _ = service
        response = client.post("/api/opcua/browse", json={
            "endpoint_url": f"opc.tcp://127.0.0.1:{opcua_sim.port}/server/",
            "depth": 3,
        })
        assert response.status_code == 200
        tree = response.json()["result"]["tree"]
        factory = tree["children"][0]
        assert factory["node_id"] == "ns=2;i=1"
        line = factory["children"][0]
        assert {c["browse_name"] for c in line["children"]} == \
            {"TemperatureSensors", "Motors"}

    def test_unreachable_target_502(self, service):
        client, _ = service
        response = client.post("/api/modbus/read", json={
            "host": "127.0.0.1", "port": 1, "address": 0,
            "timeout_ms": 200, "retries": 0,
        })
        assert response.status_code == 502
        assert response.json()["result"]["error"]["type"] == "ConnectionRefused"

    def test_device_exception_is_error_record(self, service, testbed_sim):
        client, _ = service
        response = client.post("/api/modbus/read", json={
            "host": "127.0.0.1", "port": testbed_sim.port, "unit_id": 99,
            "address": 0, "store_evidence": True,
        })
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "error"
        assert body["result"]["error"]["code"] == 11
        assert body["evidence_id"]

    def test_scan_finds_simulators(self, service, testbed_sim, opcua_sim):
        client, _ = service
        response = client.post("/api/scan", json={
            "hosts": "127.0.0.1",
            "ports": f"{testbed_sim.port},{opcua_sim.port}",
            "store_evidence": True,
        })
        tags = {f["port"]: f["service_tag"]
                for f in response.json()["result"]["findings"]}
        assert tags == {testbed_sim.port: "modbus", opcua_sim.port: "opcua"}


class TestIdempotency:
    def test_same_key_single_evidence_item(self, service, water_sim):
        client, _ = service
        body = {
            "host": "127.0.0.1", "port": water_sim.port, "unit_id": 1,
            "address": 0, "values": [300], "store_evidence": True,
            "idempotency_key": "op-1",
        }
        first = client.post("/api/modbus/write", json=body).json()
        second = client.post("/api/modbus/write", json=body).json()
        assert first["evidence_id"] == second["evidence_id"]
        items = client.get("/api/inbox").json()["items"]
        writes = [i for i in items if i["params"].get("action") == "write"]
        assert len(writes) == 1


class TestInboxRoutes:
    def test_list_after_stored_operations(self, service, testbed_sim):
        client, _ = service
        for unit in (1, 5, 10):
            client.post("/api/modbus/read", json={
                "host": "127.0.0.1", "port": testbed_sim.port, "unit_id": unit,
                "address": 0, "store_evidence": True,
            })
        body = client.get("/api/inbox").json()
        assert body["count"] == 3

    def test_category_filter(self, service, testbed_sim):
        client, _ = service
        client.post("/api/modbus/read", json={
            "host": "127.0.0.1", "port": testbed_sim.port, "address": 0,
            "store_evidence": True,
        })
        client.post("/api/scan", json={
            "hosts": "127.0.0.1", "ports": str(testbed_sim.port),
            "store_evidence": True,
        })
        assert client.get("/api/inbox?category=modbus").json()["count"] == 1
        assert client.get("/api/inbox?category=scan").json()["count"] == 1

    def test_delete_then_empty(self, service, testbed_sim):
        client, _ = service
        client.post("/api/modbus/read", json={
            "host": "127.0.0.1", "port": testbed_sim.port, "address": 0,
            "store_evidence": True,
        })
        assert client.delete("/api/inbox").json()["cleared"]
        assert client.get("/api/inbox").json()["count"] == 0


class TestReportRoutes:
    def seed_inbox(self, client, sim):
        client.post("/api/modbus/write", json={
            "host": "127.0.0.1", "port": sim.port, "unit_id": 1,
            "address": 0, "values": [500], "read_back": True,
            "store_evidence": True,
        })

    def test_offline_report_and_download(self, service, water_sim):
        client, _ = service
        self.seed_inbox(client, water_sim)
        response = client.post("/api/report", json={"audience": "executive",
                                                    "title": "Exec"})
        assert response.status_code == 200
        body = response.json()
        assert body["markdown"].startswith("---\ntitle: Exec")
        download = client.get(f"/api/report/{body['report_id']}/download")
        assert download.status_code == 200
        assert download.content == body["markdown"].encode()

    def test_invalid_audience_400(self, service):
        client, _ = service
        assert client.post("/api/report",
                           json={"audience": "manager"}).status_code == 400

    def test_unknown_report_404(self, service):
        client, _ = service
        assert client.get("/api/report/00000000deadbeef/download").status_code == 404

    def test_malformed_report_id_400(self, service):
        client, _ = service
        assert client.get("/api/report/../etc/download").status_code in (400, 404)


class TestCli:
    def test_scan_units_human_output(self, runner, testbed_sim):
        result = runner.invoke(cli_main, [
            "modbus", "scan-units", "--host", "127.0.0.1",
            "--port", str(testbed_sim.port), "--range", "1-15",
        ])
        assert result.exit_code == 0
        assert "[1, 5, 10]" in result.output

    def test_json_output_is_line_delimited_record(self, runner, testbed_sim):
        result = runner.invoke(cli_main, [
            "--json", "modbus", "read", "--host", "127.0.0.1",
            "--port", str(testbed_sim.port), "--unit", "10",
            "--type", "coil", "--address", "499", "--count", "2",
        ])
        assert result.exit_code == 0
        record = json.loads(result.output.strip())
        assert record == {"ok": True, "values": [True, False]}

    def test_gateway_exception_exit_one(self, runner, testbed_sim):
        result = runner.invoke(cli_main, [
            "modbus", "read", "--host", "127.0.0.1",
            "--port", str(testbed_sim.port), "--unit", "99", "--address", "0",
        ])
        assert result.exit_code == 1
        assert "ExceptionResponse" in result.output

    def test_unreachable_exit_one(self, runner):
        result = runner.invoke(cli_main, [
            "modbus", "read", "--host", "127.0.0.1", "--port", "1",
            "--address", "0", "--timeout", "200", "--retries", "0",
        ])
        assert result.exit_code == 1

    def test_usage_error_exit_two(self, runner):
        result = runner.invoke(cli_main, ["modbus", "read", "--address", "0"])
        assert result.exit_code == 2

    def test_opcua_write_then_read(self, runner, opcua_sim):
        url = f"opc.tcp://127.0.0.1:{opcua_sim.port}/server/"
        write = runner.invoke(cli_main, [
            "--json", "opcua", "write", "--url", url,
            "--node", "ns=2;i=20", "--int32", "1200",
        ])
        assert write.exit_code == 0
        read = runner.invoke(cli_main, [
            "--json", "opcua", "read", "--url", url, "--node", "ns=2;i=20",
        ])
        record = json.loads(read.output.strip())
        assert record["value"] == {"type": "INT32", "value": 1200}

    def test_inbox_roundtrip(self, runner, testbed_sim):
        store = runner.invoke(cli_main, [
            "modbus", "read", "--host", "127.0.0.1",
            "--port", str(testbed_sim.port), "--unit", "1",
            "--address", "0", "-E",
        ])
        assert store.exit_code == 0
        listing = runner.invoke(cli_main, ["inbox", "list"])
        assert "modbus" in listing.output
        cleared = runner.invoke(cli_main, ["inbox", "clear", "--yes"])
        assert cleared.exit_code == 0
        assert "empty" in runner.invoke(cli_main, ["inbox", "list"]).output

    def test_offline_report_command(self, runner, water_sim):
        runner.invoke(cli_main, [
            "modbus", "write", "--host", "127.0.0.1",
            "--port", str(water_sim.port), "--address", "0",
            "--values", "500", "--read-back", "-E",
        ])
        result = runner.invoke(cli_main, [
            "report", "--audience", "technical", "--offline",
        ])
        assert result.exit_code == 0
        assert "## Consolidated Mitigations" in result.output


class TestRecordEquivalence:
    """CLI structured output must equal the API result record."""

    CASES = [
        ("read", lambda sim: (
            {"host": "127.0.0.1", "port": sim.port, "unit_id": 10,
             "type": "coil", "address": 499, "count": 2},
            ["modbus", "read", "--host", "127.0.0.1", "--port", str(sim.port),
             "--unit", "10", "--type", "coil", "--address", "499",
             "--count", "2"],
            "/api/modbus/read",
        )),
        ("scan_units", lambda sim: (
            {"host": "127.0.0.1", "port": sim.port, "start": 1, "end": 15},
            ["modbus", "scan-units", "--host", "127.0.0.1",
             "--port", str(sim.port), "--range", "1-15"],
            "/api/modbus/scan-units",
        )),
        ("scan_range", lambda sim: (
            {"host": "127.0.0.1", "port": sim.port, "unit_id": 10,
             "type": "holding_register", "start": 0, "end": 99,
             "chunk_size": 50},
            ["modbus", "scan-range", "--host", "127.0.0.1",
             "--port", str(sim.port), "--unit", "10",
             "--type", "holding_register", "--start", "0", "--end", "99",
             "--chunk-size", "50"],
            "/api/modbus/scan-range",
        )),
    ]

    @pytest.mark.parametrize("name,case", CASES, ids=[c[0] for c in CASES])
    def test_cli_record_equals_api_result(self, service, runner, testbed_sim,
                                          name, case):
        client, _ = service
        api_body, cli_args, route = case(testbed_sim)
        api_result = client.post(route, json=api_body).json()["result"]
        cli_result = runner.invoke(cli_main, ["--json"] + cli_args)
        assert cli_result.exit_code == 0
        assert json.loads(cli_result.output.strip()) == api_result
