"""Modbus TCP client: reads, writes, range enumeration, and device discovery.

One logical request/response channel per connection; scan operations fan
out across connections under a concurrency bound.
"""

from __future__ import annotations

import logging
import socket
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from icskit.modbus import frames
from icskit.modbus.frames import (
    FrameError,
    MbapHeader,
    ModbusPdu,
    decode_frame,
    encode_frame,
    pack_bits,
    pack_words,
    unpack_bits,
    unpack_words,
)

logger = logging.getLogger(__name__)

DEFAULT_PORT = 502
DEFAULT_TIMEOUT_MS = 1000
DEFAULT_RETRIES = 1
DEFAULT_SCAN_CONCURRENCY = 16

# Probe address offsets used during unit-id discovery: standard start,
# alternative start, common register block, higher region, and the legacy
# Modicon numbering for holding (4xxxx) and input (3xxxx) registers.
# Modicon numbers are probed as raw protocol addresses.
PROBE_OFFSETS = (0, 1, 100, 1000)
MODICON_HOLDING_OFFSET = 40001
MODICON_INPUT_OFFSET = 30001

EXCEPTION_NAMES = {
    1: "illegal function",
    2: "illegal data address",
    3: "illegal data value",
    4: "server device failure",
    10: "gateway path unavailable",
    11: "gateway target device failed to respond",
}

# Gateway-generated exceptions prove a gateway answered, not that the
# addressed unit exists; they never count as unit-existence evidence.
GATEWAY_EXCEPTIONS = frozenset({10, 11})


class ModbusError(Exception):
    """Base class for client-side Modbus failures."""


class Timeout(ModbusError):
    """No response within the configured timeout (after retries)."""


class ConnectionRefused(ModbusError):
    """TCP connection could not be established."""


class NotWritable(ModbusError):
    """Write attempted on a read-only data type."""


class ExceptionResponse(ModbusError):
    """Server answered with a Modbus exception PDU."""

    def __init__(self, function_code: int, code: int):
        self.function_code = function_code
        self.code = code
        name = EXCEPTION_NAMES.get(code, "unknown")
        super().__init__(f"exception {code} ({name}) for function {function_code & 0x7F}")


class ModbusDataType(Enum):
    """The four primary Modbus data tables."""

    COIL = "coil"
    DISCRETE_INPUT = "discrete_input"
    HOLDING_REGISTER = "holding_register"
    INPUT_REGISTER = "input_register"

    @property
    def is_bit(self) -> bool:
        return self in (ModbusDataType.COIL, ModbusDataType.DISCRETE_INPUT)

    @property
    def writable(self) -> bool:
        return self in (ModbusDataType.COIL, ModbusDataType.HOLDING_REGISTER)

    @property
    def read_function(self) -> int:
        return {
            ModbusDataType.COIL: 1,
            ModbusDataType.DISCRETE_INPUT: 2,
            ModbusDataType.HOLDING_REGISTER: 3,
            ModbusDataType.INPUT_REGISTER: 4,
        }[self]

    @property
    def read_limit(self) -> int:
        return frames.MAX_READ_BITS if self.is_bit else frames.MAX_READ_WORDS

    @property
    def write_limit(self) -> int:
        return frames.MAX_WRITE_BITS if self.is_bit else frames.MAX_WRITE_WORDS


@dataclass(frozen=True)
class ConnectionParams:
    """Target endpoint plus request behavior knobs."""

    host: str
    port: int = DEFAULT_PORT
    unit_id: int = 1
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    retries: int = DEFAULT_RETRIES

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} outside [1, 65535]")
        if not 0 <= self.unit_id <= 255:
            raise ValueError(f"unit id {self.unit_id} outside [0, 255]")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


@dataclass
class WriteAck:
    """Server-confirmed write location."""

    address: int
    count: int


@dataclass
class UnitScanRecord:
    """Probe outcome for one candidate unit id."""

    unit_id: int
    active: bool = False
    responding: dict[ModbusDataType, list[int]] = field(default_factory=dict)
    exception_codes: list[int] = field(default_factory=list)

    @property
    def kinds(self) -> set[ModbusDataType]:
        return set(self.responding)


@dataclass
class UnitScanReport:
    """Per-unit results of a unit-id discovery sweep."""

    records: dict[int, UnitScanRecord]

    @property
    def active_units(self) -> list[int]:
        return sorted(u for u, r in self.records.items() if r.active)


@dataclass
class RangeChunk:
    """One reporting chunk of a register-range scan.

    `values` is positional (address = start_address + index); a None entry
    marks an address whose sub-read failed. Inaccessible chunks carry an
    empty list.
    """

    start_address: int
    requested_count: int
    status: str  # "accessible" | "partial" | "inaccessible"
    values: list


@dataclass
class RangeScanReport:
    """Contiguous, non-overlapping chunk records covering [start, end]."""

    dtype: ModbusDataType
    chunks: list[RangeChunk]


class ModbusClient:
    """Blocking Modbus TCP client over a single stream socket.

    One in-flight request per connection. Retries apply to timeouts only;
    exception responses are definitive answers and are never retried.
    """

    def __init__(self, params: ConnectionParams):
        self.params = params
        self._sock: socket.socket | None = None
        self._next_txid = 0

    def __enter__(self) -> "ModbusClient":
        self.connect()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def connect(self) -> None:
        if self._sock is not None:
            return
        # Connect timeouts are timeouts: they get the configured retries.
        # A refusal is a definitive answer and is not retried.
        attempts = 1 + self.params.retries
        for attempt in range(attempts):
            try:
                self._sock = socket.create_connection(
                    (self.params.host, self.params.port),
                    timeout=self.params.timeout_ms / 1000.0,
                )
                return
            except socket.timeout as e:
                if attempt == attempts - 1:
                    raise Timeout(
                        f"connect to {self.params.host}:{self.params.port} timed out"
                    ) from e
            except OSError as e:
                raise ConnectionRefused(
                    f"connect to {self.params.host}:{self.params.port} failed: {e}"
                ) from e

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def _reconnect(self) -> None:
        self.close()
        self.connect()

    def _send_recv(self, pdu: ModbusPdu, unit_id: int) -> ModbusPdu:
        """One request/response exchange; raises Timeout on silence.

        Responses are matched on transaction id + unit id; a stale frame
        (the answer to an earlier request that timed out) is discarded and
        the read continues.
        """
        assert self._sock is not None
        self._next_txid = (self._next_txid + 1) & 0xFFFF
        txid = self._next_txid
        header = MbapHeader.for_pdu(txid, unit_id, pdu)
        try:
            self._sock.sendall(encode_frame(header, pdu))
            for _ in range(8):
                raw = self._recv_frame()
                resp_header, resp_pdu = decode_frame(raw)
                if (resp_header.transaction_id, resp_header.unit_id) == (txid, unit_id):
                    return resp_pdu
        except socket.timeout as e:
            raise Timeout(f"no response from {self.params.host}:{self.params.port}") from e
        except OSError as e:
            raise ConnectionRefused(f"connection lost: {e}") from e
        raise FrameError(f"no response matched txid/unit ({txid}/{unit_id})")

    def _recv_frame(self) -> bytes:
        assert self._sock is not None
        head = self._recv_exact(frames.MBAP_SIZE)
        length = struct.unpack(">H", head[4:6])[0]
        if length < 2 or length > frames.MAX_PDU_SIZE + 1:
            raise FrameError(f"length field {length} outside [2, 254]")
        body = self._recv_exact(length - 1)
        return head + body

    def _recv_exact(self, n: int) -> bytes:
        assert self._sock is not None
        buf = bytearray()
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                raise OSError("peer closed connection")
            buf.extend(chunk)
        return bytes(buf)

    def execute(self, pdu: ModbusPdu, unit_id: int | None = None) -> ModbusPdu:
        """Run one transaction with timeout retries; raise on exception PDU."""
        unit = self.params.unit_id if unit_id is None else unit_id
        attempts = 1 + self.params.retries
        last: Timeout | None = None
        for attempt in range(attempts):
            if attempt > 0:
                self._reconnect()
            try:
                resp = self._send_recv(pdu, unit)
            except Timeout as e:
                last = e
                continue
            if resp.is_exception:
                if resp.base_function != pdu.function_code:
                    raise FrameError(
                        f"exception for function {resp.base_function}, expected {pdu.function_code}"
                    )
                raise ExceptionResponse(resp.function_code, resp.payload[0])
            if resp.function_code != pdu.function_code:
                raise FrameError(
                    f"response function {resp.function_code}, expected {pdu.function_code}"
                )
            return resp
        assert last is not None
        raise last

    # -- reads ------------------------------------------------------------

    def read(self, dtype: ModbusDataType, address: int, count: int) -> list:
        """Read `count` values starting at `address`, splitting as needed."""
        _check_range(address, count)
        values: list = []
        offset = 0
        while offset < count:
            n = min(count - offset, dtype.read_limit)
            values.extend(self._read_block(dtype, address + offset, n))
            offset += n
        return values

    def _read_block(self, dtype: ModbusDataType, address: int, count: int) -> list:
        pdu = ModbusPdu(dtype.read_function, struct.pack(">HH", address, count))
        resp = self.execute(pdu)
        if len(resp.payload) < 1:
            raise FrameError("read response missing byte count")
        byte_count = resp.payload[0]
        data = resp.payload[1:]
        if byte_count != len(data):
            raise FrameError(f"byte count {byte_count} != {len(data)} payload bytes")
        if dtype.is_bit:
            if byte_count != (count + 7) // 8:
                raise FrameError(f"expected {(count + 7) // 8} bit-field bytes, got {byte_count}")
            return unpack_bits(data, count)
        if byte_count != 2 * count:
            raise FrameError(f"expected {2 * count} register bytes, got {byte_count}")
        return unpack_words(data, count)

    # -- writes -----------------------------------------------------------

    def write(self, dtype: ModbusDataType, address: int, values: list) -> WriteAck:
        """Write values; single-element writes use FC 5/6, multi 15/16."""
        if not dtype.writable:
            raise NotWritable(f"{dtype.value} is read-only")
        if not values:
            raise ValueError("values must be non-empty")
        _check_range(address, len(values))
        if len(values) == 1:
            return self._write_single(dtype, address, values[0])
        offset = 0
        while offset < len(values):
            n = min(len(values) - offset, dtype.write_limit)
            self._write_block(dtype, address + offset, values[offset : offset + n])
            offset += n
        return WriteAck(address=address, count=len(values))

    def _write_single(self, dtype: ModbusDataType, address: int, value) -> WriteAck:
        if dtype is ModbusDataType.COIL:
            wire = 0xFF00 if value else 0x0000
            pdu = ModbusPdu(5, struct.pack(">HH", address, wire))
        else:
            wire = _check_word(value)
            pdu = ModbusPdu(6, struct.pack(">HH", address, wire))
        resp = self.execute(pdu)
        if resp.payload != pdu.payload:
            raise FrameError("single-write echo does not match request")
        return WriteAck(address=address, count=1)

    def _write_block(self, dtype: ModbusDataType, address: int, values: list) -> None:
        if dtype is ModbusDataType.COIL:
            bits = [bool(v) for v in values]
            body = pack_bits(bits)
            pdu = ModbusPdu(
                15,
                struct.pack(">HHB", address, len(bits), len(body)) + body,
            )
        else:
            words = [_check_word(v) for v in values]
            body = pack_words(words)
            pdu = ModbusPdu(
                16,
                struct.pack(">HHB", address, len(words), len(body)) + body,
            )
        resp = self.execute(pdu)
        ack_addr, ack_count = struct.unpack(">HH", resp.payload[:4])
        if ack_addr != address or ack_count != len(values):
            raise FrameError(
                f"multi-write ack ({ack_addr}, {ack_count}) does not match "
                f"request ({address}, {len(values)})"
            )


def _check_range(address: int, count: int) -> None:
    if not 0 <= address <= 0xFFFF:
        raise ValueError(f"address {address} outside [0, 65535]")
    if count < 1:
        raise ValueError("count must be positive")
    if address + count > 0x10000:
        raise ValueError(f"range [{address}, {address + count}) exceeds address space")


def _check_word(value) -> int:
    v = int(value)
    if not 0 <= v <= 0xFFFF:
        raise ValueError(f"register value {value} outside [0, 65535]")
    return v


# -- module-level operations ---------------------------------------------


def read_values(
    conn: ConnectionParams, dtype: ModbusDataType, address: int, count: int
) -> list:
    """Read `count` values of `dtype` starting at `address`."""
    with ModbusClient(conn) as client:
        return client.read(dtype, address, count)


def write_values(
    conn: ConnectionParams, dtype: ModbusDataType, address: int, values: list
) -> WriteAck:
    """Write `values` of `dtype` starting at `address`."""
    with ModbusClient(conn) as client:
        return client.write(dtype, address, values)


def enumerate_addresses(
    conn: ConnectionParams, dtype: ModbusDataType, start: int, end: int
) -> dict[int, object]:
    """Traverse [start, end] and return address -> value for readable ones.

    Reads are split at the protocol limit; a segment that draws an
    exception is bisected down to single addresses, so addresses inside a
    partially-readable segment resolve exactly. Absent addresses are
    simply missing from the map. Timeouts and connection loss abort.
    """
    if start > end:
        raise ValueError(f"start {start} > end {end}")
    _check_range(start, end - start + 1)
    result: dict[int, object] = {}
    with ModbusClient(conn) as client:

        def visit(a: int, n: int) -> None:
            try:
                values = client._read_block(dtype, a, n)
            except ExceptionResponse:
                if n == 1:
                    return
                half = n // 2
                visit(a, half)
                visit(a + half, n - half)
                return
            for i, v in enumerate(values):
                result[a + i] = v

        offset = start
        while offset <= end:
            n = min(end - offset + 1, dtype.read_limit)
            visit(offset, n)
            offset += n
    return dict(sorted(result.items()))


def scan_unit_ids(
    base: ConnectionParams,
    id_range: range | tuple[int, int],
    concurrency: int = DEFAULT_SCAN_CONCURRENCY,
) -> UnitScanReport:
    """Probe candidate unit ids and report which answered.

    Each candidate is probed with one-element reads of all four data types
    at the common offsets (plus Modicon 40001/30001 for holding/input
    registers). A unit is active when at least one probe returned a
    well-formed response other than a gateway exception; the responding
    data-type set records only non-exception probes.
    """
    if isinstance(id_range, tuple):
        id_range = range(id_range[0], id_range[1] + 1)
    ids = [u for u in id_range if 0 <= u <= 255]
    if not ids:
        raise ValueError("unit id range is empty")
    if concurrency < 1:
        raise ValueError("concurrency must be positive")

    def probe_unit(unit_id: int) -> UnitScanRecord:
        record = UnitScanRecord(unit_id=unit_id)
        params = ConnectionParams(
            host=base.host,
            port=base.port,
            unit_id=unit_id,
            timeout_ms=base.timeout_ms,
            retries=base.retries,
        )
        try:
            client = ModbusClient(params)
            client.connect()
        except ModbusError:
            return record
        try:
            for dtype in ModbusDataType:
                offsets = list(PROBE_OFFSETS)
                if dtype is ModbusDataType.HOLDING_REGISTER:
                    offsets.append(MODICON_HOLDING_OFFSET)
                elif dtype is ModbusDataType.INPUT_REGISTER:
                    offsets.append(MODICON_INPUT_OFFSET)
                for offset in offsets:
                    try:
                        client._read_block(dtype, offset, 1)
                    except ExceptionResponse as e:
                        record.exception_codes.append(e.code)
                        if e.code not in GATEWAY_EXCEPTIONS:
                            record.active = True
                    except (Timeout, ConnectionRefused, FrameError):
                        # The stream may hold a half-read or stale frame;
                        # start clean so one lost probe cannot poison the rest.
                        try:
                            client._reconnect()
                        except ModbusError:
                            return record
                    else:
                        record.responding.setdefault(dtype, []).append(offset)
                        record.active = True
        finally:
            client.close()
        return record

    with ThreadPoolExecutor(max_workers=min(concurrency, len(ids))) as pool:
        records = list(pool.map(probe_unit, ids))
    return UnitScanReport(records={r.unit_id: r for r in records})


def scan_register_range(
    conn: ConnectionParams,
    dtype: ModbusDataType,
    start: int,
    end: int,
    chunk_size: int = 1000,
) -> RangeScanReport:
    """Scan [start, end] in reporting chunks of `chunk_size` addresses.

    Chunks are read through protocol-limited sub-reads; a chunk is
    accessible when every sub-read succeeds, partial when some do, and
    inaccessible when none do.
    """
    if start > end:
        raise ValueError(f"start {start} > end {end}")
    if chunk_size < 1:
        raise ValueError("chunk size must be positive")
    _check_range(start, end - start + 1)

    chunks: list[RangeChunk] = []
    with ModbusClient(conn) as client:
        chunk_start = start
        while chunk_start <= end:
            requested = min(chunk_size, end - chunk_start + 1)
            values: list = [None] * requested
            ok_reads = 0
            total_reads = 0
            offset = 0
            while offset < requested:
                n = min(requested - offset, dtype.read_limit)
                total_reads += 1
                try:
                    block = client._read_block(dtype, chunk_start + offset, n)
                except ExceptionResponse:
                    pass
                else:
                    ok_reads += 1
                    values[offset : offset + n] = block
                offset += n
            if ok_reads == total_reads:
                status = "accessible"
            elif ok_reads > 0:
                status = "partial"
            else:
                status = "inaccessible"
                values = []
            chunks.append(
                RangeChunk(
                    start_address=chunk_start,
                    requested_count=requested,
                    status=status,
                    values=values,
                )
            )
            chunk_start += requested
    return RangeScanReport(dtype=dtype, chunks=chunks)
