"""Frame codec tests.

Expected wire bytes are built by `reference_frame`, an independent
struct-level constructor that follows the public MBAP+PDU layout and
never calls the codec under test.
"""

from __future__ import annotations

import random
import struct

import pytest
from hypothesis import given, strategies as st

from icskit.modbus.frames import (
    LengthMismatch,
    MbapHeader,
    ModbusPdu,
    ProtocolIdNonZero,
    Truncated,
    UnknownFunctionCode,
    InvalidFrame,
    FrameError,
    decode_frame,
    encode_frame,
    pack_bits,
    unpack_bits,
)


def reference_frame(txid: int, proto: int, unit: int, fc: int, payload: bytes) -> bytes:
    """Independent frame builder: 7-byte header then PDU, big-endian."""
    length = 2 + len(payload)
    return struct.pack(">HHHB", txid, proto, length, unit) + bytes([fc]) + payload


def make_pdu_read(fc: int, address: int, count: int) -> ModbusPdu:
    return ModbusPdu(fc, struct.pack(">HH", address, count))


class TestEncode:
    def test_fc3_read_request_bytes(self):
        # txid=1, unit=1, FC=3 read of 2 registers at address 0
        pdu = make_pdu_read(3, 0, 2)
        frame = encode_frame(MbapHeader.for_pdu(1, 1, pdu), pdu)
        assert frame == bytes.fromhex("000100000006010300000002")
        assert frame == reference_frame(1, 0, 1, 3, struct.pack(">HH", 0, 2))

    def test_fc1_minimal_request_shape(self):
        pdu = make_pdu_read(1, 0, 1)
        frame = encode_frame(MbapHeader.for_pdu(0, 0, pdu), pdu)
        assert len(frame) == 12
        assert struct.unpack(">H", frame[4:6])[0] == 6
        assert frame == reference_frame(0, 0, 0, 1, struct.pack(">HH", 0, 1))

    def test_length_inconsistency_rejected(self):
        pdu = make_pdu_read(3, 0, 1)
        bad_header = MbapHeader(transaction_id=1, protocol_id=0, length=99, unit_id=1)
        with pytest.raises(InvalidFrame):
            encode_frame(bad_header, pdu)

    def test_oversize_pdu_rejected(self):
        pdu = ModbusPdu(16, bytes(300))
        with pytest.raises(InvalidFrame):
            encode_frame(MbapHeader(1, 0, 254, 1), pdu)

    def test_nonzero_protocol_id_rejected(self):
        pdu = make_pdu_read(3, 0, 1)
        with pytest.raises(ProtocolIdNonZero):
            encode_frame(MbapHeader(1, 7, 6, 1), pdu)


class TestDecode:
    def test_exception_response(self):
        header, pdu = decode_frame(bytes.fromhex("000100000003018302"))
        assert header.transaction_id == 1
        assert header.unit_id == 1
        assert pdu.is_exception
        assert pdu.base_function == 3
        assert pdu.exception_code == 2

    def test_empty_input_truncated(self):
        with pytest.raises(Truncated):
            decode_frame(b"")

    def test_short_header_truncated(self):
        with pytest.raises(Truncated):
            decode_frame(bytes(5))

    def test_body_shorter_than_length_field(self):
        frame = reference_frame(1, 0, 1, 3, struct.pack(">HH", 0, 1))
        with pytest.raises(Truncated):
            decode_frame(frame[:-2])

    def test_trailing_bytes_rejected(self):
        frame = reference_frame(1, 0, 1, 3, struct.pack(">HH", 0, 1))
        with pytest.raises(LengthMismatch):
            decode_frame(frame + b"\x00")

    def test_protocol_id_nonzero(self):
        frame = struct.pack(">HHHB", 1, 5, 6, 1) + bytes([3]) + struct.pack(">HH", 0, 1)
        with pytest.raises(ProtocolIdNonZero):
            decode_frame(frame)

    def test_unknown_function_code_surfaced(self):
        frame = reference_frame(9, 0, 2, 0x2B, b"\x0e\x01\x00")
        with pytest.raises(UnknownFunctionCode) as excinfo:
            decode_frame(frame)
        assert excinfo.value.function_code == 0x2B
        assert excinfo.value.header.transaction_id == 9

    def test_exception_with_wrong_payload_size(self):
        frame = reference_frame(1, 0, 1, 0x83, b"\x02\x02")
        with pytest.raises(LengthMismatch):
            decode_frame(frame)


valid_request_pdus = st.one_of(
    st.builds(
        ModbusPdu,
        function_code=st.sampled_from([1, 2, 3, 4, 5, 6, 15, 16]),
        payload=st.binary(min_size=0, max_size=251),
    ),
    # exception responses are valid for any base function code
    st.builds(
        lambda fc, code: ModbusPdu(fc | 0x80, bytes([code])),
        fc=st.integers(min_value=0, max_value=0x7F),
        code=st.integers(min_value=1, max_value=11),
    ),
)


class TestProperties:
    @given(
        txid=st.integers(min_value=0, max_value=0xFFFF),
        unit=st.integers(min_value=0, max_value=0xFF),
        pdu=valid_request_pdus,
    )
    def test_round_trip(self, txid, unit, pdu):
        header = MbapHeader.for_pdu(txid, unit, pdu)
        assert decode_frame(encode_frame(header, pdu)) == (header, pdu)

    @given(st.binary(min_size=0, max_size=4096))
    def test_fuzz_no_crash(self, data):
        try:
            decode_frame(data)
        except FrameError:
            pass

    def test_fuzz_one_mebibyte(self):
        rng = random.Random(1234)
        blob = rng.randbytes(1 << 20)
        try:
            decode_frame(blob)
        except FrameError:
            pass

    @given(st.lists(st.booleans(), min_size=1, max_size=500))
    def test_bit_packing_round_trip(self, bits):
        assert unpack_bits(pack_bits(bits), len(bits)) == bits

    @given(
        txid=st.integers(min_value=0, max_value=0xFFFF),
        unit=st.integers(min_value=0, max_value=0xFF),
        fc=st.integers(min_value=0, max_value=0x7F),
        payload=st.binary(min_size=0, max_size=64),
    )
    def test_exception_bit_iff_single_code_byte(self, txid, unit, fc, payload):
        # A decodable response with bit 0x80 set carries exactly one byte.
        frame = reference_frame(txid, 0, unit, fc | 0x80, payload)
        if len(payload) == 1:
            _, pdu = decode_frame(frame)
            assert pdu.is_exception and pdu.exception_code == payload[0]
        else:
            with pytest.raises(FrameError):
                decode_frame(frame)
