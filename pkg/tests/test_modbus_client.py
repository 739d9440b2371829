"""Client operations against the live simulator."""

from __future__ import annotations

import socket
import threading

import pytest

from icskit.modbus.client import (
    ConnectionParams,
    ConnectionRefused,
    ExceptionResponse,
    ModbusDataType,
    NotWritable,
    Timeout,
    enumerate_addresses,
    read_values,
    scan_register_range,
    scan_unit_ids,
    write_values,
)

from tests.conftest import conn_for


class TestReadValues:
    def test_sensor_discrete_inputs(self, testbed_sim):
        values = read_values(conn_for(testbed_sim, 5), ModbusDataType.DISCRETE_INPUT, 0, 8)
        assert values == [True] * 8

    def test_actuator_coil_boundary(self, testbed_sim):
        values = read_values(conn_for(testbed_sim, 10), ModbusDataType.COIL, 499, 2)
        assert values == [True, False]

    def test_actuator_holding_value(self, testbed_sim):
        values = read_values(conn_for(testbed_sim, 10),
                             ModbusDataType.HOLDING_REGISTER, 3, 1)
        assert values == [10003]

    def test_large_read_is_split(self, testbed_sim):
        # 1000 words exceeds the 125-word per-request limit
        values = read_values(conn_for(testbed_sim, 10),
                             ModbusDataType.HOLDING_REGISTER, 0, 1000)
        assert values == [10000 + a for a in range(1000)]

    def test_exception_response_surfaced(self, testbed_sim):
        with pytest.raises(ExceptionResponse) as excinfo:
            read_values(conn_for(testbed_sim, 10),
                        ModbusDataType.HOLDING_REGISTER, 1000, 1)
        assert excinfo.value.code == 2

    def test_connection_refused(self):
        conn = ConnectionParams("127.0.0.1", 1, timeout_ms=300, retries=0)
        with pytest.raises(ConnectionRefused):
            read_values(conn, ModbusDataType.COIL, 0, 1)

    def test_precondition_rejects_overflow(self, testbed_sim):
        with pytest.raises(ValueError):
            read_values(conn_for(testbed_sim, 1), ModbusDataType.COIL, 65535, 2)


class TestWriteValues:
    def test_single_coil_write_then_read(self, testbed_sim):
        conn = conn_for(testbed_sim, 10)
        ack = write_values(conn, ModbusDataType.COIL, 0, [False])
        assert (ack.address, ack.count) == (0, 1)
        assert read_values(conn, ModbusDataType.COIL, 0, 1) == [False]

    def test_single_register_write_then_read(self, testbed_sim):
        conn = conn_for(testbed_sim, 1)
        write_values(conn, ModbusDataType.HOLDING_REGISTER, 42, [1234])
        assert read_values(conn, ModbusDataType.HOLDING_REGISTER, 42, 1) == [1234]

    def test_multi_register_write(self, testbed_sim):
        conn = conn_for(testbed_sim, 1)
        values = list(range(200))
        ack = write_values(conn, ModbusDataType.HOLDING_REGISTER, 0, values)
        assert (ack.address, ack.count) == (0, 200)
        assert read_values(conn, ModbusDataType.HOLDING_REGISTER, 0, 200) == values

    def test_multi_coil_write(self, testbed_sim):
        conn = conn_for(testbed_sim, 10)
        pattern = [bool(i % 3 == 0) for i in range(40)]
        write_values(conn, ModbusDataType.COIL, 100, pattern)
        assert read_values(conn, ModbusDataType.COIL, 100, 40) == pattern

    def test_read_only_type_rejected_client_side(self, testbed_sim):
        with pytest.raises(NotWritable):
            write_values(conn_for(testbed_sim, 5), ModbusDataType.DISCRETE_INPUT,
                         0, [True])
        with pytest.raises(NotWritable):
            write_values(conn_for(testbed_sim, 5), ModbusDataType.INPUT_REGISTER,
                         0, [1])

    def test_write_out_of_span_exception(self, testbed_sim):
        with pytest.raises(ExceptionResponse):
            write_values(conn_for(testbed_sim, 10),
                         ModbusDataType.HOLDING_REGISTER, 1000, [1])


class TestEnumerate:
    def test_full_range(self, testbed_sim):
        result = enumerate_addresses(conn_for(testbed_sim, 1),
                                     ModbusDataType.HOLDING_REGISTER, 0, 999)
        assert len(result) == 1000
        assert list(result) == sorted(result)

    def test_absent_range(self, testbed_sim):
        result = enumerate_addresses(conn_for(testbed_sim, 1),
                                     ModbusDataType.HOLDING_REGISTER, 1000, 1099)
        assert result == {}

    def test_single_address(self, testbed_sim):
        result = enumerate_addresses(conn_for(testbed_sim, 10),
                                     ModbusDataType.HOLDING_REGISTER, 5, 5)
        assert result == {5: 10005}

    def test_boundary_straddling_segment(self, testbed_sim):
        # [900, 1099] crosses the end of the exposed span inside one
        # protocol-limit read; bisection must resolve 900-999 exactly.
        result = enumerate_addresses(conn_for(testbed_sim, 10),
                                     ModbusDataType.HOLDING_REGISTER, 900, 1099)
        assert set(result) == set(range(900, 1000))
        assert result[999] == 10999

    def test_read_split_equivalence(self, testbed_sim):
        conn = conn_for(testbed_sim, 10)
        enumerated = enumerate_addresses(conn, ModbusDataType.HOLDING_REGISTER, 0, 399)
        pieces = []
        for start, count in ((0, 37), (37, 200), (237, 125), (362, 38)):
            pieces.extend(read_values(conn, ModbusDataType.HOLDING_REGISTER,
                                      start, count))
        assert pieces == [enumerated[a] for a in range(400)]


class TestScanUnitIds:
    def test_default_testbed_active_units(self, testbed_sim):
        report = scan_unit_ids(conn_for(testbed_sim), range(1, 16))
        assert report.active_units == [1, 5, 10]

    def test_sensor_excludes_coil(self, testbed_sim):
        report = scan_unit_ids(conn_for(testbed_sim), range(5, 6))
        kinds = report.records[5].kinds
        assert ModbusDataType.COIL not in kinds
        assert ModbusDataType.DISCRETE_INPUT in kinds
        assert ModbusDataType.INPUT_REGISTER in kinds
        assert ModbusDataType.HOLDING_REGISTER in kinds

    def test_actuator_kinds_and_offsets(self, testbed_sim):
        report = scan_unit_ids(conn_for(testbed_sim), range(10, 11))
        record = report.records[10]
        assert record.kinds == {ModbusDataType.COIL, ModbusDataType.HOLDING_REGISTER}
        # spans cover 0-999, so probes at 0, 1, and 100 answer; 1000 does not
        assert record.responding[ModbusDataType.COIL] == [0, 1, 100]

    def test_gateway_exception_is_not_existence_evidence(self, testbed_sim):
        report = scan_unit_ids(conn_for(testbed_sim), range(2, 5))
        assert report.active_units == []
        assert all(code == 11 for r in report.records.values()
                   for code in r.exception_codes)

    def test_closed_port_all_inactive(self):
        base = ConnectionParams("127.0.0.1", 1, timeout_ms=200, retries=0)
        report = scan_unit_ids(base, range(1, 6))
        assert report.active_units == []

    def test_tuple_range_accepted(self, testbed_sim):
        report = scan_unit_ids(conn_for(testbed_sim), (1, 15))
        assert report.active_units == [1, 5, 10]

    def test_empty_range_rejected(self, testbed_sim):
        with pytest.raises(ValueError):
            scan_unit_ids(conn_for(testbed_sim), range(5, 5))


class TestScanRegisterRange:
    def test_single_accessible_chunk_matches_store(self, testbed_sim):
        report = scan_register_range(conn_for(testbed_sim, 10),
                                     ModbusDataType.HOLDING_REGISTER, 0, 999, 1000)
        assert len(report.chunks) == 1
        chunk = report.chunks[0]
        assert chunk.status == "accessible"
        dump = testbed_sim.store.dump(10, ModbusDataType.HOLDING_REGISTER)
        assert chunk.values == [dump[a] for a in range(1000)]

    def test_inaccessible_chunks_beyond_span(self, testbed_sim):
        report = scan_register_range(conn_for(testbed_sim, 10),
                                     ModbusDataType.HOLDING_REGISTER, 0, 2999, 1000)
        statuses = [c.status for c in report.chunks]
        assert statuses == ["accessible", "inaccessible", "inaccessible"]
        assert report.chunks[1].values == []

    def test_partial_chunk(self, testbed_sim):
        # [875, 1874]: the first 125-word sub-read covers 875-999 (all
        # readable), every later sub-read is beyond the span
        report = scan_register_range(conn_for(testbed_sim, 10),
                                     ModbusDataType.HOLDING_REGISTER, 875, 1874, 1000)
        assert len(report.chunks) == 1
        chunk = report.chunks[0]
        assert chunk.status == "partial"
        assert len(chunk.values) == 1000
        assert chunk.values[0] == 10875
        assert chunk.values[124] == 10999
        assert chunk.values[125] is None
        assert chunk.values[-1] is None

    def test_chunks_cover_range_contiguously(self, testbed_sim):
        report = scan_register_range(conn_for(testbed_sim, 10),
                                     ModbusDataType.HOLDING_REGISTER, 10, 2509, 700)
        edges = [(c.start_address, c.requested_count) for c in report.chunks]
        assert edges == [(10, 700), (710, 700), (1410, 700), (2110, 400)]

    def test_chunk_size_one_equals_enumeration(self, testbed_sim):
        conn = conn_for(testbed_sim, 10)
        report = scan_register_range(conn, ModbusDataType.HOLDING_REGISTER,
                                     995, 1004, 1)
        values = {c.start_address: (c.values[0] if c.values else None)
                  for c in report.chunks}
        enumerated = enumerate_addresses(conn, ModbusDataType.HOLDING_REGISTER,
                                         995, 1004)
        assert {a: v for a, v in values.items() if v is not None} == enumerated

    def test_bit_type_chunks(self, testbed_sim):
        report = scan_register_range(conn_for(testbed_sim, 10),
                                     ModbusDataType.COIL, 0, 999, 250)
        assert [c.status for c in report.chunks] == ["accessible"] * 4
        flat = [v for c in report.chunks for v in c.values]
        assert flat == [True] * 500 + [False] * 500


class TestRetries:
    def test_timeout_then_retry_succeeds(self):
        # A listener that ignores the first connection's request entirely,
        # then answers normally on the reconnect.
        from icskit.simulators import build_default_testbed
        from icskit.simulators.modbus_sim import ProfileStore, handle_request

        store = ProfileStore(build_default_testbed(1), seed=1)
        listener = socket.socket()
        listener.bind(("127.0.0.1", 0))
        listener.listen(2)
        attempts = []
        held = []

        def serve():
            for attempt in range(2):
                conn, _ = listener.accept()
                attempts.append(attempt)
                data = conn.recv(260)
                if attempt == 0:
                    held.append(conn)  # stay silent: client times out, retries
                    continue
                conn.sendall(handle_request(store, data))
                conn.close()

        thread = threading.Thread(target=serve, daemon=True)
        thread.start()
        conn = ConnectionParams("127.0.0.1", listener.getsockname()[1],
                                unit_id=1, timeout_ms=400, retries=1)
        values = read_values(conn, ModbusDataType.HOLDING_REGISTER, 0, 1)
        assert len(values) == 1
        assert attempts == [0, 1]
        listener.close()

    def test_timeout_exhausts_retries(self):
        listener = socket.socket()
        listener.bind(("127.0.0.1", 0))
        listener.listen(4)
        conn = ConnectionParams("127.0.0.1", listener.getsockname()[1],
                                unit_id=1, timeout_ms=200, retries=1)
        with pytest.raises(Timeout):
            read_values(conn, ModbusDataType.HOLDING_REGISTER, 0, 1)
        listener.close()

    def test_exception_response_is_not_retried(self, testbed_sim):
        # an exception is definitive: the state below proves one attempt
        conn = conn_for(testbed_sim, 10, retries=3)
        with pytest.raises(ExceptionResponse):
            read_values(conn, ModbusDataType.INPUT_REGISTER, 0, 1)
