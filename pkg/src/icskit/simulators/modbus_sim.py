"""In-process Modbus TCP server hosting configurable device profiles.

The bundled testbed simulates three devices behind one endpoint: a PLC
(unit 1) with seeded-random tables, a sensor (unit 5) with all-true
discrete inputs and analog-like holding registers, and an actuator
(unit 10) with a half-enabled coil bank and baseline-offset holding
registers. A separate water-plant profile models a tank with read-only
level/flow sensors and scaled valve registers.
"""

from __future__ import annotations

import json
import logging
import random
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from icskit.modbus import frames
from icskit.modbus.client import ModbusDataType
from icskit.modbus.frames import (
    FrameError,
    MbapHeader,
    ModbusPdu,
    UnknownFunctionCode,
    decode_frame,
    encode_frame,
    pack_bits,
    pack_words,
    unpack_bits,
    unpack_words,
)

logger = logging.getLogger(__name__)

EX_ILLEGAL_FUNCTION = 1
EX_ILLEGAL_ADDRESS = 2
EX_ILLEGAL_VALUE = 3
EX_GATEWAY_NO_TARGET = 11

DEFAULT_TESTBED_PORT = 5002
WATER_PLANT_PORT = 5020

# Addresses of the water-plant process variables.
WATER_FLOW_ADDR = 0
WATER_LEVEL_ADDR = 1
FILL_VALVE_ADDR = 0
DISCHARGE_VALVE_ADDR = 1


class BindFailure(OSError):
    """Server could not bind its listen address."""


@dataclass(frozen=True)
class ScaledRegisterRule:
    """Write transform for valve-style registers.

    stored = clamp(round(written / divisor), clamp_min, clamp_max)
    """

    divisor: int = 100
    clamp_min: int = 0
    clamp_max: int = 10

    def __post_init__(self) -> None:
        if self.divisor <= 0:
            raise ValueError("divisor must be positive")
        if self.clamp_min > self.clamp_max:
            raise ValueError("clamp_min must not exceed clamp_max")

    def apply(self, written: int) -> int:
        return max(self.clamp_min, min(self.clamp_max, round(written / self.divisor)))


@dataclass(frozen=True)
class SpanInit:
    """One initialized address span of a device table.

    Policies:
        seeded-random   values drawn from the profile RNG
        constant        every address holds `value`
        linear-offset   value(a) = base + ((a - start) mod wrap); wrap
                        defaults to the full span so plain ramps need no
                        extra parameter
    """

    start: int
    count: int
    policy: str = "constant"
    value: int = 0
    base: int = 0
    wrap: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.start <= 0xFFFF or self.count < 1:
            raise ValueError(f"bad span ({self.start}, {self.count})")
        if self.start + self.count > 0x10000:
            raise ValueError("span exceeds address space")
        if self.policy not in ("seeded-random", "constant", "linear-offset"):
            raise ValueError(f"unknown init policy {self.policy!r}")

    def materialize(self, rng: random.Random, is_bit: bool) -> dict[int, int]:
        out: dict[int, int] = {}
        for i in range(self.count):
            addr = self.start + i
            if self.policy == "constant":
                v = self.value
            elif self.policy == "linear-offset":
                span = self.wrap if self.wrap is not None else self.count
                v = self.base + (i % span)
            else:
                v = rng.getrandbits(1) if is_bit else rng.getrandbits(16)
            out[addr] = (1 if v else 0) if is_bit else v & 0xFFFF
        return out


@dataclass
class DeviceProfile:
    """Declarative description of one simulated device."""

    unit_id: int
    name: str = ""
    tables: dict[ModbusDataType, list[SpanInit]] = field(default_factory=dict)
    # (start, count, rule) triples applied to holding-register writes
    scaled_spans: list[tuple[int, int, ScaledRegisterRule]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0 <= self.unit_id <= 255:
            raise ValueError(f"unit id {self.unit_id} outside [0, 255]")

    def rule_for(self, address: int) -> ScaledRegisterRule | None:
        for start, count, rule in self.scaled_spans:
            if start <= address < start + count:
                return rule
        return None

    def build_store(self, seed: int) -> dict[ModbusDataType, dict[int, int]]:
        """Materialize initial table contents; deterministic for a seed."""
        store: dict[ModbusDataType, dict[int, int]] = {}
        for dtype, spans in self.tables.items():
            rng = random.Random(f"{seed}:{self.unit_id}:{dtype.value}")
            table: dict[int, int] = {}
            for span in spans:
                table.update(span.materialize(rng, dtype.is_bit))
            store[dtype] = table
        return store


def build_default_testbed(seed: int = 1) -> list[DeviceProfile]:
    """Three-device testbed: PLC (unit 1), sensor (unit 5), actuator (unit 10)."""
    plc = DeviceProfile(
        unit_id=1,
        name="plc",
        tables={
            dtype: [SpanInit(0, 1000, policy="seeded-random")] for dtype in ModbusDataType
        },
    )
    sensor = DeviceProfile(
        unit_id=5,
        name="sensor",
        tables={
            ModbusDataType.DISCRETE_INPUT: [SpanInit(0, 1000, policy="constant", value=1)],
            ModbusDataType.INPUT_REGISTER: [SpanInit(0, 1000, policy="constant", value=0)],
            ModbusDataType.HOLDING_REGISTER: [
                SpanInit(0, 1000, policy="linear-offset", base=200, wrap=800)
            ],
        },
    )
    actuator = DeviceProfile(
        unit_id=10,
        name="actuator",
        tables={
            ModbusDataType.COIL: [
                SpanInit(0, 500, policy="constant", value=1),
                SpanInit(500, 500, policy="constant", value=0),
            ],
            ModbusDataType.HOLDING_REGISTER: [
                SpanInit(0, 1000, policy="linear-offset", base=10000)
            ],
        },
    )
    return [plc, sensor, actuator]


def build_water_plant_profile(digital: bool = False, unit_id: int = 1) -> DeviceProfile:
    """Water-tank device: level/flow sensors plus fill/discharge valves.

    Analog form exposes the sensors as read-only input registers and the
    valves as holding registers with a 100-scale write rule clamped to
    opening percentages 0..10. The digital form maps sensors to discrete
    inputs and actuators to coils.
    """
    rule = ScaledRegisterRule(divisor=100, clamp_min=0, clamp_max=10)
    if digital:
        return DeviceProfile(
            unit_id=unit_id,
            name="water-plant-digital",
            tables={
                ModbusDataType.DISCRETE_INPUT: [SpanInit(0, 2, policy="constant", value=0)],
                ModbusDataType.COIL: [SpanInit(0, 2, policy="constant", value=0)],
            },
        )
    return DeviceProfile(
        unit_id=unit_id,
        name="water-plant",
        tables={
            ModbusDataType.INPUT_REGISTER: [SpanInit(0, 2, policy="constant", value=0)],
            ModbusDataType.HOLDING_REGISTER: [SpanInit(0, 2, policy="constant", value=0)],
        },
        scaled_spans=[(0, 2, rule)],
    )


def load_profiles(path: str | Path) -> list[DeviceProfile]:
    """Load device profiles from a declarative JSON config.

    Schema: {"profiles": [{"unit_id": int, "name": str,
    "tables": {<coil|discrete_input|holding_register|input_register>:
    [{"start", "count", "policy", "value", "base", "wrap"}, ...]},
    "scaled_spans": [{"start", "count", "divisor", "clamp_min",
    "clamp_max"}, ...]}, ...]}
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    profiles = []
    for entry in doc["profiles"]:
        tables: dict[ModbusDataType, list[SpanInit]] = {}
        for kind, spans in entry.get("tables", {}).items():
            dtype = ModbusDataType(kind)
            tables[dtype] = [
                SpanInit(
                    start=s["start"],
                    count=s["count"],
                    policy=s.get("policy", "constant"),
                    value=s.get("value", 0),
                    base=s.get("base", 0),
                    wrap=s.get("wrap"),
                )
                for s in spans
            ]
        scaled = [
            (
                r["start"],
                r["count"],
                ScaledRegisterRule(
                    divisor=r.get("divisor", 100),
                    clamp_min=r.get("clamp_min", 0),
                    clamp_max=r.get("clamp_max", 10),
                ),
            )
            for r in entry.get("scaled_spans", [])
        ]
        profiles.append(
            DeviceProfile(
                unit_id=entry["unit_id"],
                name=entry.get("name", ""),
                tables=tables,
                scaled_spans=scaled,
            )
        )
    return profiles


class ProfileStore:
    """Shared register state for a set of profiles; one lock per store so
    every request observes a consistent snapshot."""

    def __init__(self, profiles: list[DeviceProfile], seed: int = 1,
                 silent_unknown_units: bool = False):
        self.profiles = {p.unit_id: p for p in profiles}
        self.tables = {p.unit_id: p.build_store(seed) for p in profiles}
        self.silent_unknown_units = silent_unknown_units
        self.lock = threading.Lock()

    def dump(self, unit_id: int, dtype: ModbusDataType) -> dict[int, int]:
        """Snapshot of one table (test oracle hook)."""
        with self.lock:
            return dict(self.tables[unit_id].get(dtype, {}))

    def set_value(self, unit_id: int, dtype: ModbusDataType, address: int, value: int) -> None:
        with self.lock:
            self.tables[unit_id].setdefault(dtype, {})[address] = value

    def get_value(self, unit_id: int, dtype: ModbusDataType, address: int) -> int:
        with self.lock:
            return self.tables[unit_id][dtype][address]


READ_FC_TABLE = {
    1: ModbusDataType.COIL,
    2: ModbusDataType.DISCRETE_INPUT,
    3: ModbusDataType.HOLDING_REGISTER,
    4: ModbusDataType.INPUT_REGISTER,
}


def _exception(header: MbapHeader, function_code: int, code: int) -> bytes:
    pdu = ModbusPdu(function_code | frames.EXCEPTION_BIT, bytes([code]))
    resp_header = MbapHeader.for_pdu(header.transaction_id, header.unit_id, pdu)
    return encode_frame(resp_header, pdu)


def _reply(header: MbapHeader, pdu: ModbusPdu) -> bytes:
    resp_header = MbapHeader.for_pdu(header.transaction_id, header.unit_id, pdu)
    return encode_frame(resp_header, pdu)


def handle_request(store: ProfileStore, frame: bytes) -> bytes | None:
    """Apply one request frame to the store and build the response frame.

    Returns None when the request is malformed beyond answering, or when
    the store is configured to stay silent for unknown unit ids.
    """
    try:
        header, pdu = decode_frame(frame)
    except UnknownFunctionCode as e:
        if e.header is not None:
            return _exception(e.header, e.function_code & ~frames.EXCEPTION_BIT,
                              EX_ILLEGAL_FUNCTION)
        return None
    except FrameError:
        return None

    if header.unit_id not in store.profiles:
        if store.silent_unknown_units:
            return None
        return _exception(header, pdu.function_code, EX_GATEWAY_NO_TARGET)

    profile = store.profiles[header.unit_id]
    fc = pdu.function_code
    with store.lock:
        tables = store.tables[header.unit_id]
        try:
            if fc in READ_FC_TABLE:
                return _handle_read(header, pdu, profile, tables)
            if fc == 5:
                return _handle_write_single_coil(header, pdu, profile, tables)
            if fc == 6:
                return _handle_write_single_register(header, pdu, profile, tables)
            if fc == 15:
                return _handle_write_multiple_coils(header, pdu, profile, tables)
            if fc == 16:
                return _handle_write_multiple_registers(header, pdu, profile, tables)
        except struct.error:
            return _exception(header, fc, EX_ILLEGAL_VALUE)
    return _exception(header, fc, EX_ILLEGAL_FUNCTION)


def _span_ok(table: dict[int, int] | None, address: int, count: int) -> bool:
    if table is None:
        return False
    return all(address + i in table for i in range(count))


def _handle_read(header, pdu, profile, tables) -> bytes:
    dtype = READ_FC_TABLE[pdu.function_code]
    address, count = struct.unpack(">HH", pdu.payload[:4])
    limit = frames.MAX_READ_BITS if dtype.is_bit else frames.MAX_READ_WORDS
    if not 1 <= count <= limit:
        return _exception(header, pdu.function_code, EX_ILLEGAL_VALUE)
    if dtype not in profile.tables:
        return _exception(header, pdu.function_code, EX_ILLEGAL_FUNCTION)
    table = tables.get(dtype)
    if not _span_ok(table, address, count):
        return _exception(header, pdu.function_code, EX_ILLEGAL_ADDRESS)
    values = [table[address + i] for i in range(count)]
    if dtype.is_bit:
        body = pack_bits([bool(v) for v in values])
    else:
        body = pack_words(values)
    return _reply(header, ModbusPdu(pdu.function_code, bytes([len(body)]) + body))


def _handle_write_single_coil(header, pdu, profile, tables) -> bytes:
    address, wire = struct.unpack(">HH", pdu.payload[:4])
    if wire not in (0x0000, 0xFF00):
        return _exception(header, 5, EX_ILLEGAL_VALUE)
    if ModbusDataType.COIL not in profile.tables:
        return _exception(header, 5, EX_ILLEGAL_FUNCTION)
    table = tables.get(ModbusDataType.COIL)
    if not _span_ok(table, address, 1):
        return _exception(header, 5, EX_ILLEGAL_ADDRESS)
    table[address] = 1 if wire == 0xFF00 else 0
    return _reply(header, pdu)


def _handle_write_single_register(header, pdu, profile, tables) -> bytes:
    address, value = struct.unpack(">HH", pdu.payload[:4])
    if ModbusDataType.HOLDING_REGISTER not in profile.tables:
        return _exception(header, 6, EX_ILLEGAL_FUNCTION)
    table = tables.get(ModbusDataType.HOLDING_REGISTER)
    if not _span_ok(table, address, 1):
        return _exception(header, 6, EX_ILLEGAL_ADDRESS)
    rule = profile.rule_for(address)
    table[address] = rule.apply(value) if rule else value
    # FC 6 echoes the request even when a write rule transforms the store.
    return _reply(header, pdu)


def _handle_write_multiple_coils(header, pdu, profile, tables) -> bytes:
    address, count, byte_count = struct.unpack(">HHB", pdu.payload[:5])
    data = pdu.payload[5:]
    if not 1 <= count <= frames.MAX_WRITE_BITS or byte_count != (count + 7) // 8 \
            or len(data) != byte_count:
        return _exception(header, 15, EX_ILLEGAL_VALUE)
    if ModbusDataType.COIL not in profile.tables:
        return _exception(header, 15, EX_ILLEGAL_FUNCTION)
    table = tables.get(ModbusDataType.COIL)
    if not _span_ok(table, address, count):
        return _exception(header, 15, EX_ILLEGAL_ADDRESS)
    for i, bit in enumerate(unpack_bits(data, count)):
        table[address + i] = 1 if bit else 0
    return _reply(header, ModbusPdu(15, struct.pack(">HH", address, count)))


def _handle_write_multiple_registers(header, pdu, profile, tables) -> bytes:
    address, count, byte_count = struct.unpack(">HHB", pdu.payload[:5])
    data = pdu.payload[5:]
    if not 1 <= count <= frames.MAX_WRITE_WORDS or byte_count != 2 * count \
            or len(data) != byte_count:
        return _exception(header, 16, EX_ILLEGAL_VALUE)
    if ModbusDataType.HOLDING_REGISTER not in profile.tables:
        return _exception(header, 16, EX_ILLEGAL_FUNCTION)
    table = tables.get(ModbusDataType.HOLDING_REGISTER)
    if not _span_ok(table, address, count):
        return _exception(header, 16, EX_ILLEGAL_ADDRESS)
    for i, value in enumerate(unpack_words(data, count)):
        rule = profile.rule_for(address + i)
        table[address + i] = rule.apply(value) if rule else value
    return _reply(header, ModbusPdu(16, struct.pack(">HH", address, count)))


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        store: ProfileStore = self.server.store  # type: ignore[attr-defined]
        sock: socket.socket = self.request
        sock.settimeout(30.0)
        try:
            while True:
                head = self._recv_exact(sock, frames.MBAP_SIZE)
                if head is None:
                    return
                length = struct.unpack(">H", head[4:6])[0]
                if length < 2 or length > frames.MAX_PDU_SIZE + 1:
                    return
                body = self._recv_exact(sock, length - 1)
                if body is None:
                    return
                response = handle_request(store, head + body)
                if response is not None:
                    sock.sendall(response)
        except (socket.timeout, OSError):
            return

    @staticmethod
    def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
        buf = bytearray()
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                return None
            buf.extend(chunk)
        return bytes(buf)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    # scans open many connections at once; the default backlog of 5 drops
    # SYNs under the burst
    request_queue_size = 64


class ModbusSimulator:
    """Running simulator handle: address, store access, and shutdown."""

    def __init__(self, host: str, port: int, profiles: list[DeviceProfile],
                 seed: int = 1, silent_unknown_units: bool = False,
                 ticker: Callable[[ProfileStore, float], None] | None = None,
                 tick_interval: float = 1.0):
        self.store = ProfileStore(profiles, seed=seed,
                                  silent_unknown_units=silent_unknown_units)
        try:
            self._server = _Server((host, port), _Handler)
        except OSError as e:
            raise BindFailure(f"cannot bind {host}:{port}: {e}") from e
        self._server.store = self.store  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._ticker = ticker
        self._tick_interval = tick_interval
        self._stop_tick = threading.Event()
        self._tick_thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> "ModbusSimulator":
        self._thread.start()
        if self._ticker is not None:
            self._tick_thread = threading.Thread(target=self._tick_loop, daemon=True)
            self._tick_thread.start()
        return self

    def _tick_loop(self) -> None:
        while not self._stop_tick.wait(self._tick_interval):
            try:
                self._ticker(self.store, self._tick_interval)
            except Exception:
                logger.exception("simulator ticker failed")

    def stop(self) -> None:
        self._stop_tick.set()
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "ModbusSimulator":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def water_plant_ticker(k: float = 10.0, level_max: int = 1000):
    """Mass-balance sensor update: level += k * (fill - discharge), with
    flow following the fill valve. Values stay within 16-bit range."""

    def tick(store: ProfileStore, dt: float) -> None:
        for unit_id, profile in store.profiles.items():
            if not profile.name.startswith("water-plant"):
                continue
            with store.lock:
                tables = store.tables[unit_id]
                if profile.name == "water-plant":
                    hr = tables[ModbusDataType.HOLDING_REGISTER]
                    ir = tables[ModbusDataType.INPUT_REGISTER]
                    fill = hr.get(FILL_VALVE_ADDR, 0)
                    discharge = hr.get(DISCHARGE_VALVE_ADDR, 0)
                    level = ir.get(WATER_LEVEL_ADDR, 0)
                    level = int(max(0, min(level_max, level + k * dt * (fill - discharge))))
                    ir[WATER_LEVEL_ADDR] = level
                    ir[WATER_FLOW_ADDR] = int(fill * k)
                else:
                    co = tables[ModbusDataType.COIL]
                    di = tables[ModbusDataType.DISCRETE_INPUT]
                    di[WATER_FLOW_ADDR] = co.get(FILL_VALVE_ADDR, 0)
                    di[WATER_LEVEL_ADDR] = 1 if co.get(FILL_VALVE_ADDR, 0) and \
                        not co.get(DISCHARGE_VALVE_ADDR, 0) else 0

    return tick


def serve_modbus(
    bind: tuple[str, int],
    profiles: list[DeviceProfile],
    seed: int = 1,
    silent_unknown_units: bool = False,
    ticker: Callable[[ProfileStore, float], None] | None = None,
) -> ModbusSimulator:
    """Start a simulator on `bind` and return its running handle."""
    host, port = bind
    sim = ModbusSimulator(host, port, profiles, seed=seed,
                          silent_unknown_units=silent_unknown_units, ticker=ticker)
    return sim.start()
