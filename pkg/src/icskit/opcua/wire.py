"""OPC UA binary encoding primitives and connection-protocol framing.

All multi-byte fields are little-endian. Only single-chunk ('F') messages
are produced or accepted.
"""

from __future__ import annotations

import socket
import struct
from datetime import datetime, timedelta, timezone

from icskit.opcua.types import NodeId, VariantType, VariantValue

MAX_MESSAGE_SIZE = 1 << 22  # generous for a desk-scale address space

# Offset between the OPC UA epoch (1601-01-01) and the Unix epoch, in
# 100 ns ticks.
_EPOCH_TICKS = 116444736000000000
_UA_EPOCH = datetime(1601, 1, 1, tzinfo=timezone.utc)


class WireError(ValueError):
    """Malformed or unsupported bytes on the wire."""


def datetime_to_ticks(dt: datetime) -> int:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 10_000_000) + _EPOCH_TICKS


def ticks_to_datetime(ticks: int) -> datetime:
    if ticks <= 0:
        return _UA_EPOCH
    return _UA_EPOCH + timedelta(microseconds=ticks / 10)


def now_ticks() -> int:
    return datetime_to_ticks(datetime.now(timezone.utc))


class Writer:
    """Append-only little-endian encoder."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def data(self) -> bytes:
        return bytes(self._buf)

    def __len__(self) -> int:
        return len(self._buf)

    def raw(self, b: bytes) -> "Writer":
        self._buf.extend(b)
        return self

    def u8(self, v: int) -> "Writer":
        return self.raw(struct.pack("<B", v))

    def u16(self, v: int) -> "Writer":
        return self.raw(struct.pack("<H", v))

    def u32(self, v: int) -> "Writer":
        return self.raw(struct.pack("<I", v))

    def i32(self, v: int) -> "Writer":
        return self.raw(struct.pack("<i", v))

    def i64(self, v: int) -> "Writer":
        return self.raw(struct.pack("<q", v))

    def f64(self, v: float) -> "Writer":
        return self.raw(struct.pack("<d", v))

    def boolean(self, v: bool) -> "Writer":
        return self.u8(1 if v else 0)

    def string(self, s: str | None) -> "Writer":
        if s is None:
            return self.i32(-1)
        raw = s.encode("utf-8")
        return self.i32(len(raw)).raw(raw)

    def bytestring(self, b: bytes | None) -> "Writer":
        if b is None:
            return self.i32(-1)
        return self.i32(len(b)).raw(b)

    def node_id(self, nid: NodeId) -> "Writer":
        if nid.is_numeric:
            ident = int(nid.identifier)
            if nid.namespace_index == 0 and ident <= 0xFF:
                return self.u8(0x00).u8(ident)
            if nid.namespace_index <= 0xFF and ident <= 0xFFFF:
                return self.u8(0x01).u8(nid.namespace_index).u16(ident)
            return self.u8(0x02).u16(nid.namespace_index).u32(ident)
        return self.u8(0x03).u16(nid.namespace_index).string(str(nid.identifier))

    def expanded_node_id(self, nid: NodeId) -> "Writer":
        return self.node_id(nid)

    def qualified_name(self, namespace_index: int, name: str) -> "Writer":
        return self.u16(namespace_index).string(name)

    def localized_text(self, text: str | None) -> "Writer":
        if text is None:
            return self.u8(0x00)
        return self.u8(0x02).string(text)

    def variant(self, value: VariantValue | None) -> "Writer":
        if value is None:
            return self.u8(0x00)
        self.u8(value.type.value)
        if value.type is VariantType.BOOLEAN:
            return self.boolean(bool(value.value))
        if value.type is VariantType.INT32:
            return self.i32(int(value.value))
        if value.type is VariantType.DOUBLE:
            return self.f64(float(value.value))
        if value.type is VariantType.STRING:
            return self.string(str(value.value))
        if value.type is VariantType.TIMESTAMP:
            return self.i64(datetime_to_ticks(value.value))
        raise WireError(f"unsupported variant tag {value.type}")

    def extension_object(self, type_id: NodeId | None, body: bytes | None) -> "Writer":
        if type_id is None:
            return self.node_id(NodeId(0, 0)).u8(0x00)
        self.node_id(type_id)
        if body is None:
            return self.u8(0x00)
        return self.u8(0x01).bytestring(body)


class Reader:
    """Cursor-based little-endian decoder; never reads past the buffer."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def raw(self, n: int) -> bytes:
        if n < 0 or self.remaining < n:
            raise WireError(f"need {n} bytes, have {self.remaining}")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self.raw(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.raw(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.raw(4))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self.raw(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.raw(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.raw(8))[0]

    def boolean(self) -> bool:
        return self.u8() != 0

    def string(self) -> str | None:
        n = self.i32()
        if n < 0:
            return None
        return self.raw(n).decode("utf-8", errors="replace")

    def bytestring(self) -> bytes | None:
        n = self.i32()
        if n < 0:
            return None
        return self.raw(n)

    def node_id(self) -> NodeId:
        enc = self.u8()
        kind = enc & 0x0F
        if kind == 0x00:
            return NodeId(0, self.u8())
        if kind == 0x01:
            ns = self.u8()
            return NodeId(ns, self.u16())
        if kind == 0x02:
            ns = self.u16()
            return NodeId(ns, self.u32())
        if kind == 0x03:
            ns = self.u16()
            return NodeId(ns, self.string() or "")
        raise WireError(f"unsupported node id encoding 0x{enc:02x}")

    def expanded_node_id(self) -> NodeId:
        # Namespace-uri / server-index forms are outside the subset.
        return self.node_id()

    def qualified_name(self) -> tuple[int, str]:
        ns = self.u16()
        return ns, self.string() or ""

    def localized_text(self) -> str | None:
        mask = self.u8()
        locale = self.string() if mask & 0x01 else None
        text = self.string() if mask & 0x02 else None
        del locale
        return text

    def variant(self) -> VariantValue | None:
        enc = self.u8()
        if enc == 0x00:
            return None
        if enc & 0xC0:
            raise WireError("array variants outside the subset")
        try:
            tag = VariantType(enc & 0x3F)
        except ValueError as e:
            raise WireError(f"unsupported variant tag {enc & 0x3F}") from e
        if tag is VariantType.BOOLEAN:
            return VariantValue.boolean(self.boolean())
        if tag is VariantType.INT32:
            return VariantValue.int32(self.i32())
        if tag is VariantType.DOUBLE:
            return VariantValue.double(self.f64())
        if tag is VariantType.STRING:
            return VariantValue.string(self.string() or "")
        return VariantValue.timestamp(ticks_to_datetime(self.i64()))

    def extension_object(self) -> tuple[NodeId, bytes | None]:
        type_id = self.node_id()
        mask = self.u8()
        if mask == 0x00:
            return type_id, None
        if mask == 0x01:
            return type_id, self.bytestring() or b""
        raise WireError("XML extension objects outside the subset")

    def diagnostic_info(self) -> None:
        mask = self.u8()
        if mask != 0:
            raise WireError("non-empty DiagnosticInfo outside the subset")


# -- connection-protocol messages ------------------------------------------

MSG_HELLO = b"HEL"
MSG_ACK = b"ACK"
MSG_ERROR = b"ERR"
MSG_OPEN = b"OPN"
MSG_CLOSE = b"CLO"
MSG_MSG = b"MSG"


def write_message(sock: socket.socket, msg_type: bytes, body: bytes) -> None:
    if len(body) + 8 > MAX_MESSAGE_SIZE:
        raise WireError("message exceeds single-chunk size limit")
    sock.sendall(msg_type + b"F" + struct.pack("<I", len(body) + 8) + body)


def read_message(sock: socket.socket) -> tuple[bytes, bytes]:
    """Read one framed message; returns (type, body)."""
    header = _recv_exact(sock, 8)
    msg_type, chunk = header[:3], header[3:4]
    size = struct.unpack("<I", header[4:8])[0]
    if size < 8 or size > MAX_MESSAGE_SIZE:
        raise WireError(f"message size {size} outside bounds")
    if chunk != b"F":
        raise WireError("multi-chunk messages outside the subset")
    body = _recv_exact(sock, size - 8)
    return msg_type, body


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed connection")
        buf.extend(chunk)
    return bytes(buf)
