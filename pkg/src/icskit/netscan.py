"""Concurrent TCP connect scanner with protocol-probe classification.

Classification is behavior-based: an OPC UA Hello and a minimal Modbus
read are tried in that order, and only well-formed protocol responses
earn a tag. Probes are read-only; the scanner never writes to a target.
"""

from __future__ import annotations

import ipaddress
import json
import re
import socket
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from icskit.modbus import frames
from icskit.opcua.wire import MSG_ACK, MSG_ERROR, MSG_HELLO, Writer

DEFAULT_CONNECT_TIMEOUT_MS = 500
DEFAULT_CONCURRENCY = 256

_HOSTNAME_RE = re.compile(r"^[A-Za-z0-9]([A-Za-z0-9.-]{0,252}[A-Za-z0-9])?$")


class ScanSpecError(ValueError):
    """Base class for target-specification failures."""


class InvalidHostSpec(ScanSpecError):
    pass


class InvalidPortSpec(ScanSpecError):
    pass


class EmptyExpansion(ScanSpecError):
    pass


@dataclass(frozen=True)
class ScanTarget:
    """Expanded, deduplicated host and port sets."""

    hosts: tuple[str, ...]
    ports: tuple[int, ...]

    def pairs(self) -> list[tuple[str, int]]:
        return [(h, p) for h in self.hosts for p in self.ports]


@dataclass(frozen=True)
class ScanConfig:
    timeout_ms: int = DEFAULT_CONNECT_TIMEOUT_MS
    concurrency: int = DEFAULT_CONCURRENCY
    retries: int = 0
    classify: bool = True

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.concurrency < 1:
            raise ValueError("concurrency bound must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


@dataclass
class ScanFinding:
    host: str
    port: int
    state: str  # always "open"; closed/filtered ports produce no finding
    service_tag: str  # "modbus" | "opcua" | "unknown"
    evidence: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "host": self.host,
            "port": self.port,
            "state": self.state,
            "service_tag": self.service_tag,
            "evidence": self.evidence,
            "timestamp": self.timestamp,
        }


def parse_targets(host_spec: str, port_spec: str) -> ScanTarget:
    """Expand host and port specs; rejects malformed input precisely.

    Hosts: comma-separated addresses, CIDR blocks (expanded to every
    address in the block), or hostnames. Ports: comma-separated numbers
    and inclusive A-B ranges.
    """
    hosts: list[str] = []
    seen: set[str] = set()
    for token in (t.strip() for t in host_spec.split(",")):
        if not token:
            continue
        expanded = _expand_host_token(token)
        for h in expanded:
            if h not in seen:
                seen.add(h)
                hosts.append(h)

    ports: list[int] = []
    seen_ports: set[int] = set()
    for token in (t.strip() for t in port_spec.split(",")):
        if not token:
            continue
        for p in _expand_port_token(token):
            if p not in seen_ports:
                seen_ports.add(p)
                ports.append(p)
    ports.sort()

    if not hosts or not ports:
        raise EmptyExpansion(
            f"specs expanded to {len(hosts)} hosts x {len(ports)} ports"
        )
    return ScanTarget(hosts=tuple(hosts), ports=tuple(ports))


def _expand_host_token(token: str) -> list[str]:
    if "/" in token:
        try:
            network = ipaddress.ip_network(token, strict=False)
        except ValueError as e:
            raise InvalidHostSpec(f"bad CIDR block {token!r}: {e}") from e
        if network.num_addresses > 1 << 16:
            raise InvalidHostSpec(f"CIDR block {token!r} expands to too many hosts")
        return [str(a) for a in network]
    try:
        ipaddress.ip_address(token)
        return [token]
    except ValueError:
        pass
    if _HOSTNAME_RE.match(token):
        return [token]
    raise InvalidHostSpec(f"{token!r} is not an address, CIDR block, or hostname")


def _expand_port_token(token: str) -> list[int]:
    if "-" in token:
        left, sep, right = token.partition("-")
        try:
            lo, hi = int(left), int(right)
        except ValueError as e:
            raise InvalidPortSpec(f"bad port range {token!r}") from e
        if not (1 <= lo <= hi <= 65535):
            raise InvalidPortSpec(f"port range {token!r} outside [1, 65535] or reversed")
        return list(range(lo, hi + 1))
    try:
        port = int(token)
    except ValueError as e:
        raise InvalidPortSpec(f"bad port {token!r}") from e
    if not 1 <= port <= 65535:
        raise InvalidPortSpec(f"port {port} outside [1, 65535]")
    return [port]


class ScanInstrumentation:
    """Optional hooks observing connection attempts (used by tests to
    check the concurrency bound)."""

    def connect_started(self, host: str, port: int) -> None:  # pragma: no cover
        pass

    def connect_finished(self, host: str, port: int, open_: bool) -> None:  # pragma: no cover
        pass


def run_scan(
    target: ScanTarget,
    config: ScanConfig | None = None,
    instrumentation: ScanInstrumentation | None = None,
) -> list[ScanFinding]:
    """TCP-connect every (host, port) pair under the concurrency bound.

    Open ports become findings; per-connection errors mean closed or
    filtered and produce none. Classification runs on each open port when
    enabled.
    """
    config = config or ScanConfig()
    pairs = target.pairs()
    if not pairs:
        return []
    timeout_s = config.timeout_ms / 1000.0

    def probe(pair: tuple[str, int]) -> ScanFinding | None:
        host, port = pair
        if instrumentation is not None:
            instrumentation.connect_started(host, port)
        open_ = False
        try:
            for _ in range(1 + config.retries):
                try:
                    with socket.create_connection((host, port), timeout=timeout_s):
                        open_ = True
                        break
                except OSError:
                    continue
        finally:
            if instrumentation is not None:
                instrumentation.connect_finished(host, port, open_)
        if not open_:
            return None
        if config.classify:
            tag, evidence = classify_service(host, port, config.timeout_ms)
        else:
            tag, evidence = "unknown", "classification disabled"
        return ScanFinding(
            host=host,
            port=port,
            state="open",
            service_tag=tag,
            evidence=evidence,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )

    with ThreadPoolExecutor(max_workers=min(config.concurrency, len(pairs))) as pool:
        results = list(pool.map(probe, pairs))
    return [f for f in results if f is not None]


def classify_service(host: str, port: int, timeout_ms: int = 1000) -> tuple[str, str]:
    """Identify the protocol behind an open port with read-only probes.

    Order matters: the OPC UA Hello is tried first because it is cheap to
    rule out and the Modbus probe would send application bytes an OPC UA
    server rejects noisily.
    """
    timeout_s = timeout_ms / 1000.0
    evidence = _probe_opcua(host, port, timeout_s)
    if evidence:
        return "opcua", evidence
    evidence = _probe_modbus(host, port, timeout_s)
    if evidence:
        return "modbus", evidence
    return "unknown", "no protocol probe produced a well-formed response"


def _probe_opcua(host: str, port: int, timeout_s: float) -> str | None:
    try:
        with socket.create_connection((host, port), timeout=timeout_s) as sock:
            w = Writer()
            w.u32(0)
            w.u32(1 << 16)
            w.u32(1 << 16)
            w.u32(1 << 16)
            w.u32(1)
            w.string(f"opc.tcp://{host}:{port}/")
            body = w.data()
            sock.sendall(MSG_HELLO + b"F" + struct.pack("<I", len(body) + 8) + body)
            head = _recv_exact(sock, 8)
            if head is None:
                return None
            msg_type = head[:3]
            if msg_type == MSG_ACK:
                return "opc.tcp hello acknowledged"
            if msg_type == MSG_ERROR:
                return "opc.tcp hello answered with a protocol error message"
    except OSError:
        pass
    return None


def _probe_modbus(host: str, port: int, timeout_s: float) -> str | None:
    try:
        with socket.create_connection((host, port), timeout=timeout_s) as sock:
            request = frames.encode_frame(
                frames.MbapHeader(transaction_id=1, protocol_id=0, length=6, unit_id=0),
                frames.ModbusPdu(3, struct.pack(">HH", 0, 1)),
            )
            sock.sendall(request)
            head = _recv_exact(sock, frames.MBAP_SIZE)
            if head is None:
                return None
            length = struct.unpack(">H", head[4:6])[0]
            if not 2 <= length <= frames.MAX_PDU_SIZE + 1:
                return None
            body = _recv_exact(sock, length - 1)
            if body is None:
                return None
            try:
                header, pdu = frames.decode_frame(head + body)
            except frames.FrameError:
                return None
            if header.transaction_id != 1 or pdu.base_function != 3:
                return None
            if pdu.is_exception:
                return f"modbus read answered with exception {pdu.exception_code}"
            # A genuine FC 3 response to a one-register read is byte count 2
            # plus two data bytes; anything else (e.g. an echoed request) is
            # not a Modbus server talking.
            if len(pdu.payload) == 3 and pdu.payload[0] == 2:
                return "modbus read answered with a well-formed register response"
            return None
    except OSError:
        pass
    return None


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    try:
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                return None
            buf.extend(chunk)
    except OSError:
        return None
    return bytes(buf)


def write_findings(findings: list[ScanFinding], path: str | Path) -> None:
    """Export findings as line-delimited JSON records."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for finding in findings:
            fh.write(json.dumps(finding.to_dict(), sort_keys=True) + "\n")


class CountingInstrumentation(ScanInstrumentation):
    """Tracks the peak number of simultaneously pending connects."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.pending = 0
        self.peak = 0
        self.total = 0

    def connect_started(self, host: str, port: int) -> None:
        with self._lock:
            self.pending += 1
            self.total += 1
            self.peak = max(self.peak, self.pending)

    def connect_finished(self, host: str, port: int, open_: bool) -> None:
        with self._lock:
            self.pending -= 1
