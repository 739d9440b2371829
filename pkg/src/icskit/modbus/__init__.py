"""Modbus TCP: frame codec, data types, and client operations."""

from icskit.modbus.frames import (
    EXCEPTION_BIT,
    FrameError,
    InvalidFrame,
    LengthMismatch,
    MbapHeader,
    ModbusPdu,
    ProtocolIdNonZero,
    Truncated,
    UnknownFunctionCode,
    decode_frame,
    encode_frame,
)
from icskit.modbus.client import (
    ConnectionParams,
    ConnectionRefused,
    ExceptionResponse,
    ModbusClient,
    ModbusDataType,
    ModbusError,
    NotWritable,
    PROBE_OFFSETS,
    RangeChunk,
    RangeScanReport,
    Timeout,
    UnitScanRecord,
    UnitScanReport,
    WriteAck,
    enumerate_addresses,
    read_values,
    scan_register_range,
    scan_unit_ids,
    write_values,
)

__all__ = [
    "EXCEPTION_BIT",
    "FrameError",
    "InvalidFrame",
    "LengthMismatch",
    "MbapHeader",
    "ModbusPdu",
    "ProtocolIdNonZero",
    "Truncated",
    "UnknownFunctionCode",
    "decode_frame",
    "encode_frame",
    "ConnectionParams",
    "ConnectionRefused",
    "ExceptionResponse",
    "ModbusClient",
    "ModbusDataType",
    "ModbusError",
    "NotWritable",
    "PROBE_OFFSETS",
    "RangeChunk",
    "RangeScanReport",
    "Timeout",
    "UnitScanRecord",
    "UnitScanReport",
    "WriteAck",
    "enumerate_addresses",
    "read_values",
    "scan_register_range",
    "scan_unit_ids",
    "write_values",
]
