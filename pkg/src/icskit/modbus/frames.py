"""Modbus TCP frame codec.

Wire layout: a 7-byte MBAP header (transaction id, protocol id, length,
unit id; multi-byte fields big-endian) followed by the PDU (function code
plus payload). The length field counts the unit id byte plus the PDU.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

MBAP_SIZE = 7
MAX_PDU_SIZE = 253
EXCEPTION_BIT = 0x80

# Function codes this stack speaks. Anything else decodes to
# UnknownFunctionCode so callers can surface it instead of guessing.
REQUEST_FUNCTIONS = frozenset({1, 2, 3, 4, 5, 6, 15, 16})

# Per-request protocol maxima (counts of addressable elements).
MAX_READ_BITS = 2000
MAX_READ_WORDS = 125
MAX_WRITE_BITS = 1968
MAX_WRITE_WORDS = 123


class FrameError(Exception):
    """Base class for frame codec failures."""


class InvalidFrame(FrameError):
    """Frame violates an MBAP/PDU invariant (encode side or structure)."""


class Truncated(FrameError):
    """Fewer bytes than the header or the length field promises."""


class ProtocolIdNonZero(FrameError):
    """MBAP protocol id must be zero for Modbus."""


class LengthMismatch(FrameError):
    """MBAP length field disagrees with the actual byte count."""


class UnknownFunctionCode(FrameError):
    """PDU carries a function code outside the supported set."""

    def __init__(self, function_code: int, header: "MbapHeader | None" = None):
        self.function_code = function_code
        self.header = header
        super().__init__(f"unsupported function code 0x{function_code:02x}")


@dataclass(frozen=True)
class MbapHeader:
    """Modbus TCP application header."""

    transaction_id: int
    protocol_id: int
    length: int
    unit_id: int

    def validate(self) -> None:
        if not 0 <= self.transaction_id <= 0xFFFF:
            raise InvalidFrame(f"transaction id {self.transaction_id} out of range")
        if self.protocol_id != 0:
            raise ProtocolIdNonZero(f"protocol id {self.protocol_id} != 0")
        if not 2 <= self.length <= MAX_PDU_SIZE + 1:
            raise InvalidFrame(f"length field {self.length} outside [2, 254]")
        if not 0 <= self.unit_id <= 0xFF:
            raise InvalidFrame(f"unit id {self.unit_id} out of range")

    @classmethod
    def for_pdu(cls, transaction_id: int, unit_id: int, pdu: "ModbusPdu") -> "MbapHeader":
        """Header with the length field derived from the PDU."""
        return cls(
            transaction_id=transaction_id,
            protocol_id=0,
            length=1 + pdu.size,
            unit_id=unit_id,
        )


@dataclass(frozen=True)
class ModbusPdu:
    """Function code plus payload; exception responses set bit 0x80."""

    function_code: int
    payload: bytes = b""

    @property
    def size(self) -> int:
        return 1 + len(self.payload)

    @property
    def is_exception(self) -> bool:
        return bool(self.function_code & EXCEPTION_BIT)

    @property
    def base_function(self) -> int:
        return self.function_code & ~EXCEPTION_BIT

    @property
    def exception_code(self) -> int | None:
        if self.is_exception and len(self.payload) == 1:
            return self.payload[0]
        return None

    def validate(self) -> None:
        if not 0 <= self.function_code <= 0xFF:
            raise InvalidFrame(f"function code {self.function_code} out of range")
        if self.is_exception:
            # Exception PDUs are self-describing for any base function:
            # devices answer unsupported codes with fc|0x80 + one code byte.
            if len(self.payload) != 1:
                raise LengthMismatch(
                    f"exception PDU must carry exactly one code byte, got {len(self.payload)}"
                )
        elif self.function_code not in REQUEST_FUNCTIONS:
            raise UnknownFunctionCode(self.function_code)
        if self.size > MAX_PDU_SIZE:
            raise InvalidFrame(f"PDU size {self.size} exceeds {MAX_PDU_SIZE}")


def encode_frame(header: MbapHeader, pdu: ModbusPdu) -> bytes:
    """Encode header + PDU to wire bytes (big-endian multi-byte fields)."""
    header.validate()
    pdu.validate()
    if header.length != 1 + pdu.size:
        raise InvalidFrame(
            f"length field {header.length} inconsistent with PDU of {pdu.size} bytes"
        )
    return (
        struct.pack(
            ">HHHB",
            header.transaction_id,
            header.protocol_id,
            header.length,
            header.unit_id,
        )
        + bytes([pdu.function_code])
        + pdu.payload
    )


def decode_frame(data: bytes) -> tuple[MbapHeader, ModbusPdu]:
    """Decode wire bytes into (header, pdu) or raise a structured FrameError.

    Safe on arbitrary input; never reads past the buffer.
    """
    if len(data) < MBAP_SIZE:
        raise Truncated(f"need {MBAP_SIZE} header bytes, got {len(data)}")
    transaction_id, protocol_id, length, unit_id = struct.unpack(">HHHB", data[:MBAP_SIZE])
    if protocol_id != 0:
        raise ProtocolIdNonZero(f"protocol id {protocol_id} != 0")
    if length < 2 or length > MAX_PDU_SIZE + 1:
        raise LengthMismatch(f"length field {length} outside [2, 254]")
    expected = MBAP_SIZE - 1 + length
    if len(data) < expected:
        raise Truncated(f"length field promises {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise LengthMismatch(f"{len(data) - expected} trailing bytes after frame")

    header = MbapHeader(
        transaction_id=transaction_id,
        protocol_id=protocol_id,
        length=length,
        unit_id=unit_id,
    )
    function_code = data[MBAP_SIZE]
    payload = bytes(data[MBAP_SIZE + 1 :])
    pdu = ModbusPdu(function_code=function_code, payload=payload)
    if pdu.is_exception:
        if len(payload) != 1:
            raise LengthMismatch(
                f"exception PDU must carry exactly one code byte, got {len(payload)}"
            )
    elif function_code not in REQUEST_FUNCTIONS:
        raise UnknownFunctionCode(function_code, header)
    return header, pdu


def pack_bits(values: list[bool]) -> bytes:
    """Pack booleans LSB-first into the Modbus bit-field layout."""
    out = bytearray((len(values) + 7) // 8)
    for i, v in enumerate(values):
        if v:
            out[i // 8] |= 1 << (i % 8)
    return bytes(out)


def unpack_bits(data: bytes, count: int) -> list[bool]:
    """Unpack `count` booleans from a Modbus bit field."""
    if len(data) < (count + 7) // 8:
        raise LengthMismatch(f"bit field of {len(data)} bytes too short for {count} bits")
    return [bool(data[i // 8] >> (i % 8) & 1) for i in range(count)]


def pack_words(values: list[int]) -> bytes:
    """Pack 16-bit register values big-endian."""
    return struct.pack(f">{len(values)}H", *values)


def unpack_words(data: bytes, count: int) -> list[int]:
    """Unpack `count` big-endian 16-bit register values."""
    if len(data) < 2 * count:
        raise LengthMismatch(f"register field of {len(data)} bytes too short for {count} words")
    return list(struct.unpack(f">{count}H", data[: 2 * count]))
