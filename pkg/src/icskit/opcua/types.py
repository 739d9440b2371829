"""OPC UA domain types and client-facing errors."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum, IntEnum


class OpcUaError(Exception):
    """Base class for OPC UA failures."""


class InvalidEndpointUrl(OpcUaError, ValueError):
    """Endpoint URL is not a valid opc.tcp URL (raised before any I/O)."""


class ConnectionRefused(OpcUaError):
    """TCP connection could not be established."""


class Timeout(OpcUaError):
    """No response within the socket timeout."""


class HandshakeRejected(OpcUaError):
    """Hello/Acknowledge or secure-channel negotiation failed."""


class AuthRejected(OpcUaError):
    """Server rejected the supplied identity token."""


class SessionClosed(OpcUaError):
    """Operation attempted on a closed session handle."""


class Unsupported(OpcUaError):
    """Feature outside the implemented subset (e.g., non-None security)."""


class ServiceFault(OpcUaError):
    """Server answered a service call with a fault status."""

    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(message or f"service fault 0x{status:08x}")


class NodeUnknown(OpcUaError):
    """Target node id does not exist in the server address space."""


class AccessDenied(OpcUaError):
    """Node exists but the operation is not permitted."""


class TypeMismatch(OpcUaError):
    """Written variant tag differs from the node's data type."""


# Status codes used across client and server.
class Status:
    GOOD = 0x00000000
    BAD_UNEXPECTED = 0x80010000
    BAD_TIMEOUT = 0x800A0000
    BAD_SERVICE_UNSUPPORTED = 0x800B0000
    BAD_USER_ACCESS_DENIED = 0x801F0000
    BAD_IDENTITY_TOKEN_INVALID = 0x80200000
    BAD_IDENTITY_TOKEN_REJECTED = 0x80210000
    BAD_SESSION_ID_INVALID = 0x80250000
    BAD_NODE_ID_UNKNOWN = 0x80340000
    BAD_ATTRIBUTE_ID_INVALID = 0x80350000
    BAD_NOT_READABLE = 0x803A0000
    BAD_NOT_WRITABLE = 0x803B0000
    BAD_SECURITY_POLICY_REJECTED = 0x80550000
    BAD_TYPE_MISMATCH = 0x80740000
    BAD_TCP_MESSAGE_TYPE_INVALID = 0x807E0000


_NODEID_RE = re.compile(r"^(?:ns=(\d+);)?(i|s)=(.*)$", re.DOTALL)


@dataclass(frozen=True)
class NodeId:
    """Node identity: namespace index plus numeric or string identifier."""

    namespace_index: int
    identifier: int | str

    def __post_init__(self) -> None:
        if not 0 <= self.namespace_index <= 0xFFFF:
            raise ValueError(f"namespace index {self.namespace_index} out of range")
        if isinstance(self.identifier, int) and not 0 <= self.identifier <= 0xFFFFFFFF:
            raise ValueError(f"numeric identifier {self.identifier} out of range")

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.identifier, int)

    def render(self) -> str:
        kind = "i" if self.is_numeric else "s"
        return f"ns={self.namespace_index};{kind}={self.identifier}"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        # No strip: whitespace is significant inside string identifiers.
        m = _NODEID_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse node id {text!r}")
        ns = int(m.group(1)) if m.group(1) is not None else 0
        if m.group(2) == "i":
            try:
                ident: int | str = int(m.group(3))
            except ValueError as e:
                raise ValueError(f"numeric node id has non-numeric value {m.group(3)!r}") from e
        else:
            ident = m.group(3)
        return cls(namespace_index=ns, identifier=ident)


class VariantType(Enum):
    """Supported value tags (ids match the wire built-in type ids)."""

    BOOLEAN = 1
    INT32 = 6
    DOUBLE = 11
    STRING = 12
    TIMESTAMP = 13


@dataclass(frozen=True)
class VariantValue:
    """Tagged scalar value."""

    type: VariantType
    value: object

    def __post_init__(self) -> None:
        t, v = self.type, self.value
        if t is VariantType.BOOLEAN and not isinstance(v, bool):
            raise TypeError("BOOLEAN variant requires bool")
        if t is VariantType.INT32:
            if not isinstance(v, int) or isinstance(v, bool):
                raise TypeError("INT32 variant requires int")
            if not -(2**31) <= v <= 2**31 - 1:
                raise ValueError(f"{v} outside Int32 range")
        if t is VariantType.DOUBLE and not isinstance(v, float):
            raise TypeError("DOUBLE variant requires float")
        if t is VariantType.STRING and not isinstance(v, str):
            raise TypeError("STRING variant requires str")
        if t is VariantType.TIMESTAMP and not isinstance(v, datetime):
            raise TypeError("TIMESTAMP variant requires datetime")

    @classmethod
    def boolean(cls, v: bool) -> "VariantValue":
        return cls(VariantType.BOOLEAN, bool(v))

    @classmethod
    def int32(cls, v: int) -> "VariantValue":
        return cls(VariantType.INT32, int(v))

    @classmethod
    def double(cls, v: float) -> "VariantValue":
        return cls(VariantType.DOUBLE, float(v))

    @classmethod
    def string(cls, v: str) -> "VariantValue":
        return cls(VariantType.STRING, str(v))

    @classmethod
    def timestamp(cls, v: datetime) -> "VariantValue":
        if v.tzinfo is None:
            v = v.replace(tzinfo=timezone.utc)
        return cls(VariantType.TIMESTAMP, v)


class NodeClass(IntEnum):
    OBJECT = 1
    VARIABLE = 2
    METHOD = 4


class SecurityMode(IntEnum):
    NONE = 1
    SIGN = 2
    SIGN_AND_ENCRYPT = 3


class TokenType(IntEnum):
    ANONYMOUS = 0
    USERNAME_PASSWORD = 1
    CERTIFICATE = 2
    ISSUED_TOKEN = 3


@dataclass(frozen=True)
class AccessLevel:
    readable: bool = True
    writable: bool = False

    # AccessLevel attribute bits: 0x01 CurrentRead, 0x02 CurrentWrite
    def to_byte(self) -> int:
        return (0x01 if self.readable else 0) | (0x02 if self.writable else 0)

    @classmethod
    def from_byte(cls, b: int) -> "AccessLevel":
        return cls(readable=bool(b & 0x01), writable=bool(b & 0x02))


@dataclass
class EndpointInfo:
    """Advertised endpoint metadata."""

    url: str
    security_policy: str  # "None", "Basic256Sha256", ...
    security_mode: str  # "None", "Sign", "SignAndEncrypt"
    token_types: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not self.token_types:
            raise ValueError("endpoint must advertise at least one token type")


@dataclass
class NodeDescriptor:
    """Browse-tree node: identity, name, class, and discovered children."""

    node_id: NodeId
    browse_name: str
    node_class: NodeClass
    children: list["NodeDescriptor"] = field(default_factory=list)

    @property
    def namespace_index(self) -> int:
        return self.node_id.namespace_index


SECURITY_POLICY_NONE_URI = "http://opcfoundation.org/UA/SecurityPolicy#None"

POLICY_URI_NAMES = {
    SECURITY_POLICY_NONE_URI: "None",
    "http://opcfoundation.org/UA/SecurityPolicy#Basic256Sha256": "Basic256Sha256",
}
POLICY_NAME_URIS = {v: k for k, v in POLICY_URI_NAMES.items()}

# Standard Objects folder.
OBJECTS_NODE = NodeId(0, 85)
