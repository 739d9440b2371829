"""Target parsing, concurrent scanning, and service classification."""

from __future__ import annotations

import json
import socket
import threading

import pytest

from icskit.netscan import (
    CountingInstrumentation,
    EmptyExpansion,
    InvalidHostSpec,
    InvalidPortSpec,
    ScanConfig,
    ScanTarget,
    classify_service,
    parse_targets,
    run_scan,
    write_findings,
)


class TestParseTargets:
    def test_cidr_times_range_expansion(self):
        target = parse_targets("192.168.1.0/30", "500-505")
        assert len(target.hosts) == 4
        assert len(target.ports) == 6
        assert len(target.pairs()) == 24

    def test_hostname_with_port_list(self):
        target = parse_targets("localhost", "502,4840,5002")
        assert target.pairs() == [("localhost", 502), ("localhost", 4840),
                                  ("localhost", 5002)]

    def test_bad_cidr(self):
        with pytest.raises(InvalidHostSpec):
            parse_targets("10.0.0.1/33", "1")

    def test_bad_hostname(self):
        with pytest.raises(InvalidHostSpec):
            parse_targets("not a host!", "1")

    @pytest.mark.parametrize("spec", ["0", "65536", "70000", "abc", "10-5"])
    def test_bad_ports(self, spec):
        with pytest.raises(InvalidPortSpec):
            parse_targets("127.0.0.1", spec)

    def test_empty_expansion(self):
        with pytest.raises(EmptyExpansion):
            parse_targets("", "502")
        with pytest.raises(EmptyExpansion):
            parse_targets("127.0.0.1", "")

    def test_deduplication(self):
        target = parse_targets("127.0.0.1,127.0.0.1", "502,502,502")
        assert target.hosts == ("127.0.0.1",)
        assert target.ports == (502,)

    def test_mixed_hosts(self):
        target = parse_targets("127.0.0.1, 10.0.0.0/31, example.org", "80")
        assert target.hosts == ("127.0.0.1", "10.0.0.0", "10.0.0.1", "example.org")


class TestRunScan:
    def test_bundled_simulators_found_and_tagged(self, testbed_sim, water_sim,
                                                 opcua_sim):
        ports = f"{testbed_sim.port},{water_sim.port},{opcua_sim.port}"
        target = parse_targets("127.0.0.1", ports)
        findings = run_scan(target, ScanConfig(timeout_ms=1000))
        assert len(findings) == 3
        tags = {f.port: f.service_tag for f in findings}
        assert tags[testbed_sim.port] == "modbus"
        assert tags[water_sim.port] == "modbus"
        assert tags[opcua_sim.port] == "opcua"
        assert all(f.state == "open" for f in findings)
        assert all(f.evidence for f in findings)

    def test_empty_target_yields_no_findings(self):
        target = ScanTarget(hosts=(), ports=())
        assert run_scan(target) == []

    def test_closed_port_produces_no_finding(self):
        target = parse_targets("127.0.0.1", "1")
        assert run_scan(target, ScanConfig(timeout_ms=300)) == []

    def test_concurrency_bound_respected(self, testbed_sim):
        target = parse_targets("127.0.0.1", f"1-40,{testbed_sim.port}")
        instrumentation = CountingInstrumentation()
        config = ScanConfig(timeout_ms=300, concurrency=5)
        run_scan(target, config, instrumentation)
        assert instrumentation.peak <= 5
        assert instrumentation.total == len(target.pairs())

    def test_deterministic_against_quiescent_simulators(self, testbed_sim,
                                                        opcua_sim):
        target = parse_targets("127.0.0.1", f"{testbed_sim.port},{opcua_sim.port}")
        first = [(f.host, f.port, f.service_tag) for f in run_scan(target)]
        second = [(f.host, f.port, f.service_tag) for f in run_scan(target)]
        assert sorted(first) == sorted(second)

    def test_classification_can_be_disabled(self, testbed_sim):
        target = parse_targets("127.0.0.1", str(testbed_sim.port))
        findings = run_scan(target, ScanConfig(classify=False))
        assert findings[0].service_tag == "unknown"


class TestClassifyService:
    def test_modbus_on_nonstandard_port(self, testbed_sim):
        tag, evidence = classify_service("127.0.0.1", testbed_sim.port, 1000)
        assert tag == "modbus"
        assert "exception" in evidence or "register" in evidence

    def test_opcua(self, opcua_sim):
        tag, _ = classify_service("127.0.0.1", opcua_sim.port, 1000)
        assert tag == "opcua"

    def test_echo_server_unknown(self):
        listener = socket.socket()
        listener.bind(("127.0.0.1", 0))
        listener.listen(4)
        alive = True

        def echo():
            while alive:
                try:
                    conn, _ = listener.accept()
                except OSError:
                    return
                try:
                    conn.sendall(conn.recv(128))
                except OSError:
                    pass
                conn.close()

        thread = threading.Thread(target=echo, daemon=True)
        thread.start()
        tag, _ = classify_service("127.0.0.1", listener.getsockname()[1], 500)
        assert tag == "unknown"
        alive = False
        listener.close()

    def test_silent_server_unknown(self):
        listener = socket.socket()
        listener.bind(("127.0.0.1", 0))
        listener.listen(4)
        tag, _ = classify_service("127.0.0.1", listener.getsockname()[1], 300)
        assert tag == "unknown"
        listener.close()

    def test_probe_never_writes_simulator_state(self, testbed_sim):
        from icskit.modbus.client import ModbusDataType

        before = {
            dtype: testbed_sim.store.dump(10, dtype)
            for dtype in (ModbusDataType.COIL, ModbusDataType.HOLDING_REGISTER)
        }
        classify_service("127.0.0.1", testbed_sim.port, 500)
        after = {
            dtype: testbed_sim.store.dump(10, dtype)
            for dtype in (ModbusDataType.COIL, ModbusDataType.HOLDING_REGISTER)
        }
        assert before == after


class TestExport:
    def test_line_delimited_json(self, tmp_path, testbed_sim):
        target = parse_targets("127.0.0.1", str(testbed_sim.port))
        findings = run_scan(target)
        path = tmp_path / "findings.jsonl"
        write_findings(findings, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        record = json.loads(lines[0])
        assert record["port"] == testbed_sim.port
        assert record["service_tag"] == "modbus"
