"""Service request/response payloads shared by client and server.

Each payload encodes as: binary-encoding type id (four-byte NodeId form)
followed by the structure fields. Layouts follow the standard service
definitions; fields outside the implemented subset are carried as nulls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from icskit.opcua.types import NodeId, VariantValue
from icskit.opcua.wire import Reader, Writer, WireError, now_ticks

# Binary-encoding type ids of the services in the subset.
OPEN_SECURE_CHANNEL_REQUEST = 446
OPEN_SECURE_CHANNEL_RESPONSE = 449
CLOSE_SECURE_CHANNEL_REQUEST = 452
GET_ENDPOINTS_REQUEST = 428
GET_ENDPOINTS_RESPONSE = 431
CREATE_SESSION_REQUEST = 461
CREATE_SESSION_RESPONSE = 464
ACTIVATE_SESSION_REQUEST = 467
ACTIVATE_SESSION_RESPONSE = 470
CLOSE_SESSION_REQUEST = 473
CLOSE_SESSION_RESPONSE = 476
BROWSE_REQUEST = 527
BROWSE_RESPONSE = 530
READ_REQUEST = 631
READ_RESPONSE = 634
WRITE_REQUEST = 673
WRITE_RESPONSE = 676
SERVICE_FAULT = 397

ANONYMOUS_IDENTITY_TOKEN = 321
USERNAME_IDENTITY_TOKEN = 324

ATTR_BROWSE_NAME = 3
ATTR_DISPLAY_NAME = 4
ATTR_VALUE = 13
ATTR_ACCESS_LEVEL = 17

NULL_NODE = NodeId(0, 0)


def write_type_id(w: Writer, type_id: int) -> None:
    w.u8(0x01).u8(0).u16(type_id)


def read_type_id(r: Reader) -> int:
    nid = r.node_id()
    if nid.namespace_index != 0 or not nid.is_numeric:
        raise WireError(f"unexpected service type id {nid}")
    return int(nid.identifier)


@dataclass
class RequestHeader:
    auth_token: NodeId = NULL_NODE
    timestamp: int = 0
    request_handle: int = 0
    timeout_hint: int = 10_000

    def encode(self, w: Writer) -> None:
        w.node_id(self.auth_token)
        w.i64(self.timestamp or now_ticks())
        w.u32(self.request_handle)
        w.u32(0)  # return diagnostics
        w.string(None)  # audit entry id
        w.u32(self.timeout_hint)
        w.extension_object(None, None)

    @classmethod
    def decode(cls, r: Reader) -> "RequestHeader":
        auth = r.node_id()
        ts = r.i64()
        handle = r.u32()
        r.u32()
        r.string()
        hint = r.u32()
        r.extension_object()
        return cls(auth_token=auth, timestamp=ts, request_handle=handle, timeout_hint=hint)


@dataclass
class ResponseHeader:
    service_result: int = 0
    request_handle: int = 0
    timestamp: int = 0

    def encode(self, w: Writer) -> None:
        w.i64(self.timestamp or now_ticks())
        w.u32(self.request_handle)
        w.u32(self.service_result)
        w.u8(0x00)  # empty service diagnostics
        w.i32(-1)  # null string table
        w.extension_object(None, None)

    @classmethod
    def decode(cls, r: Reader) -> "ResponseHeader":
        ts = r.i64()
        handle = r.u32()
        result = r.u32()
        r.diagnostic_info()
        n = r.i32()
        for _ in range(max(0, n)):
            r.string()
        r.extension_object()
        return cls(service_result=result, request_handle=handle, timestamp=ts)


@dataclass
class DataValue:
    value: VariantValue | None = None
    status: int = 0

    def encode(self, w: Writer) -> None:
        mask = 0
        if self.value is not None:
            mask |= 0x01
        if self.status != 0:
            mask |= 0x02
        w.u8(mask)
        if self.value is not None:
            w.variant(self.value)
        if self.status != 0:
            w.u32(self.status)

    @classmethod
    def decode(cls, r: Reader) -> "DataValue":
        mask = r.u8()
        value = r.variant() if mask & 0x01 else None
        status = r.u32() if mask & 0x02 else 0
        if mask & 0x04:
            r.i64()
        if mask & 0x08:
            r.i64()
        if mask & 0x10:
            r.u16()
        if mask & 0x20:
            r.u16()
        return cls(value=value, status=status)


@dataclass
class ApplicationDescription:
    application_uri: str = "urn:icskit"
    product_uri: str = "urn:icskit"
    application_name: str = "icskit"
    application_type: int = 0  # server

    def encode(self, w: Writer) -> None:
        w.string(self.application_uri)
        w.string(self.product_uri)
        w.localized_text(self.application_name)
        w.u32(self.application_type)
        w.string(None)  # gateway server uri
        w.string(None)  # discovery profile uri
        w.i32(-1)  # discovery urls

    @classmethod
    def decode(cls, r: Reader) -> "ApplicationDescription":
        uri = r.string() or ""
        product = r.string() or ""
        name = r.localized_text() or ""
        app_type = r.u32()
        r.string()
        r.string()
        n = r.i32()
        for _ in range(max(0, n)):
            r.string()
        return cls(uri, product, name, app_type)


@dataclass
class UserTokenPolicy:
    policy_id: str
    token_type: int  # TokenType value

    def encode(self, w: Writer) -> None:
        w.string(self.policy_id)
        w.u32(self.token_type)
        w.string(None)  # issued token type
        w.string(None)  # issuer endpoint url
        w.string(None)  # security policy uri

    @classmethod
    def decode(cls, r: Reader) -> "UserTokenPolicy":
        policy_id = r.string() or ""
        token_type = r.u32()
        r.string()
        r.string()
        r.string()
        return cls(policy_id, token_type)


@dataclass
class EndpointDescription:
    endpoint_url: str
    security_mode: int
    security_policy_uri: str
    user_tokens: list[UserTokenPolicy] = field(default_factory=list)
    server: ApplicationDescription = field(default_factory=ApplicationDescription)

    def encode(self, w: Writer) -> None:
        w.string(self.endpoint_url)
        self.server.encode(w)
        w.bytestring(None)  # server certificate
        w.u32(self.security_mode)
        w.string(self.security_policy_uri)
        w.i32(len(self.user_tokens))
        for t in self.user_tokens:
            t.encode(w)
        w.string("http://opcfoundation.org/UA-Profile/Transport/uatcp-uasc-uabinary")
        w.u8(0)  # security level

    @classmethod
    def decode(cls, r: Reader) -> "EndpointDescription":
        url = r.string() or ""
        server = ApplicationDescription.decode(r)
        r.bytestring()
        mode = r.u32()
        policy = r.string() or ""
        n = r.i32()
        tokens = [UserTokenPolicy.decode(r) for _ in range(max(0, n))]
        r.string()
        r.u8()
        return cls(url, mode, policy, tokens, server)


# -- secure channel ---------------------------------------------------------


@dataclass
class OpenSecureChannelRequest:
    header: RequestHeader = field(default_factory=RequestHeader)
    requested_lifetime: int = 3600_000

    def encode(self, w: Writer) -> None:
        write_type_id(w, OPEN_SECURE_CHANNEL_REQUEST)
        self.header.encode(w)
        w.u32(0)  # client protocol version
        w.u32(0)  # request type: issue
        w.u32(1)  # security mode: none
        w.bytestring(None)  # client nonce
        w.u32(self.requested_lifetime)

    @classmethod
    def decode(cls, r: Reader) -> "OpenSecureChannelRequest":
        header = RequestHeader.decode(r)
        r.u32()
        r.u32()
        r.u32()
        r.bytestring()
        lifetime = r.u32()
        return cls(header=header, requested_lifetime=lifetime)


@dataclass
class OpenSecureChannelResponse:
    header: ResponseHeader
    channel_id: int
    token_id: int
    lifetime: int = 3600_000

    def encode(self, w: Writer) -> None:
        write_type_id(w, OPEN_SECURE_CHANNEL_RESPONSE)
        self.header.encode(w)
        w.u32(0)  # server protocol version
        w.u32(self.channel_id)
        w.u32(self.token_id)
        w.i64(now_ticks())
        w.u32(self.lifetime)
        w.bytestring(None)  # server nonce

    @classmethod
    def decode(cls, r: Reader) -> "OpenSecureChannelResponse":
        header = ResponseHeader.decode(r)
        r.u32()
        channel_id = r.u32()
        token_id = r.u32()
        r.i64()
        lifetime = r.u32()
        r.bytestring()
        return cls(header=header, channel_id=channel_id, token_id=token_id, lifetime=lifetime)


# -- get endpoints ------------------------------------------------------------


@dataclass
class GetEndpointsRequest:
    header: RequestHeader = field(default_factory=RequestHeader)
    endpoint_url: str = ""

    def encode(self, w: Writer) -> None:
        write_type_id(w, GET_ENDPOINTS_REQUEST)
        self.header.encode(w)
        w.string(self.endpoint_url)
        w.i32(-1)  # locale ids
        w.i32(-1)  # profile uris

    @classmethod
    def decode(cls, r: Reader) -> "GetEndpointsRequest":
        header = RequestHeader.decode(r)
        url = r.string() or ""
        for _ in range(2):
            n = r.i32()
            for _ in range(max(0, n)):
                r.string()
        return cls(header=header, endpoint_url=url)


@dataclass
class GetEndpointsResponse:
    header: ResponseHeader
    endpoints: list[EndpointDescription] = field(default_factory=list)

    def encode(self, w: Writer) -> None:
        write_type_id(w, GET_ENDPOINTS_RESPONSE)
        self.header.encode(w)
        w.i32(len(self.endpoints))
        for e in self.endpoints:
            e.encode(w)

    @classmethod
    def decode(cls, r: Reader) -> "GetEndpointsResponse":
        header = ResponseHeader.decode(r)
        n = r.i32()
        endpoints = [EndpointDescription.decode(r) for _ in range(max(0, n))]
        return cls(header=header, endpoints=endpoints)


# -- sessions -----------------------------------------------------------------


@dataclass
class CreateSessionRequest:
    header: RequestHeader = field(default_factory=RequestHeader)
    endpoint_url: str = ""
    session_name: str = "icskit session"

    def encode(self, w: Writer) -> None:
        write_type_id(w, CREATE_SESSION_REQUEST)
        self.header.encode(w)
        ApplicationDescription(application_type=1).encode(w)
        w.string(None)  # server uri
        w.string(self.endpoint_url)
        w.string(self.session_name)
        w.bytestring(None)  # client nonce
        w.bytestring(None)  # client certificate
        w.f64(3600_000.0)  # requested session timeout
        w.u32(0)  # max response message size (no limit)

    @classmethod
    def decode(cls, r: Reader) -> "CreateSessionRequest":
        header = RequestHeader.decode(r)
        ApplicationDescription.decode(r)
        r.string()
        url = r.string() or ""
        name = r.string() or ""
        r.bytestring()
        r.bytestring()
        r.f64()
        r.u32()
        return cls(header=header, endpoint_url=url, session_name=name)


@dataclass
class CreateSessionResponse:
    header: ResponseHeader
    session_id: NodeId
    auth_token: NodeId
    endpoints: list[EndpointDescription] = field(default_factory=list)

    def encode(self, w: Writer) -> None:
        write_type_id(w, CREATE_SESSION_RESPONSE)
        self.header.encode(w)
        w.node_id(self.session_id)
        w.node_id(self.auth_token)
        w.f64(3600_000.0)  # revised timeout
        w.bytestring(None)  # server nonce
        w.bytestring(None)  # server certificate
        w.i32(len(self.endpoints))
        for e in self.endpoints:
            e.encode(w)
        w.i32(-1)  # server software certificates
        w.string(None)  # signature algorithm
        w.bytestring(None)  # signature
        w.u32(0)  # max request message size

    @classmethod
    def decode(cls, r: Reader) -> "CreateSessionResponse":
        header = ResponseHeader.decode(r)
        session_id = r.node_id()
        auth_token = r.node_id()
        r.f64()
        r.bytestring()
        r.bytestring()
        n = r.i32()
        endpoints = [EndpointDescription.decode(r) for _ in range(max(0, n))]
        n = r.i32()
        if n > 0:
            raise WireError("software certificates outside the subset")
        r.string()
        r.bytestring()
        r.u32()
        return cls(header=header, session_id=session_id, auth_token=auth_token,
                   endpoints=endpoints)


@dataclass
class ActivateSessionRequest:
    header: RequestHeader
    # (policy_id,) for anonymous; (policy_id, user, password) for username
    identity: tuple

    def encode(self, w: Writer) -> None:
        write_type_id(w, ACTIVATE_SESSION_REQUEST)
        self.header.encode(w)
        w.string(None)  # client signature algorithm
        w.bytestring(None)  # client signature
        w.i32(-1)  # client software certificates
        w.i32(-1)  # locale ids
        body = Writer()
        if len(self.identity) == 1:
            body.string(self.identity[0])
            w.extension_object(NodeId(0, ANONYMOUS_IDENTITY_TOKEN), body.data())
        else:
            policy_id, user, password = self.identity
            body.string(policy_id)
            body.string(user)
            body.bytestring(password.encode("utf-8"))
            body.string(None)  # encryption algorithm (plaintext under None)
            w.extension_object(NodeId(0, USERNAME_IDENTITY_TOKEN), body.data())
        w.string(None)  # user token signature algorithm
        w.bytestring(None)  # user token signature

    @classmethod
    def decode(cls, r: Reader) -> "ActivateSessionRequest":
        header = RequestHeader.decode(r)
        r.string()
        r.bytestring()
        for _ in range(2):
            n = r.i32()
            for _ in range(max(0, n)):
                r.string()
        type_id, body = r.extension_object()
        if body is None:
            raise WireError("missing identity token body")
        br = Reader(body)
        if type_id == NodeId(0, ANONYMOUS_IDENTITY_TOKEN):
            identity: tuple = (br.string() or "",)
        elif type_id == NodeId(0, USERNAME_IDENTITY_TOKEN):
            policy_id = br.string() or ""
            user = br.string() or ""
            password = (br.bytestring() or b"").decode("utf-8", errors="replace")
            br.string()
            identity = (policy_id, user, password)
        else:
            raise WireError(f"unsupported identity token {type_id}")
        r.string()
        r.bytestring()
        return cls(header=header, identity=identity)


@dataclass
class ActivateSessionResponse:
    header: ResponseHeader

    def encode(self, w: Writer) -> None:
        write_type_id(w, ACTIVATE_SESSION_RESPONSE)
        self.header.encode(w)
        w.bytestring(None)  # server nonce
        w.i32(-1)  # results
        w.i32(-1)  # diagnostic infos

    @classmethod
    def decode(cls, r: Reader) -> "ActivateSessionResponse":
        header = ResponseHeader.decode(r)
        r.bytestring()
        n = r.i32()
        for _ in range(max(0, n)):
            r.u32()
        n = r.i32()
        for _ in range(max(0, n)):
            r.diagnostic_info()
        return cls(header=header)


@dataclass
class CloseSessionRequest:
    header: RequestHeader

    def encode(self, w: Writer) -> None:
        write_type_id(w, CLOSE_SESSION_REQUEST)
        self.header.encode(w)
        w.boolean(True)  # delete subscriptions

    @classmethod
    def decode(cls, r: Reader) -> "CloseSessionRequest":
        header = RequestHeader.decode(r)
        r.boolean()
        return cls(header=header)


@dataclass
class CloseSessionResponse:
    header: ResponseHeader

    def encode(self, w: Writer) -> None:
        write_type_id(w, CLOSE_SESSION_RESPONSE)
        self.header.encode(w)

    @classmethod
    def decode(cls, r: Reader) -> "CloseSessionResponse":
        return cls(header=ResponseHeader.decode(r))


# -- browse -------------------------------------------------------------------


@dataclass
class BrowseRequest:
    header: RequestHeader
    nodes: list[NodeId]

    def encode(self, w: Writer) -> None:
        write_type_id(w, BROWSE_REQUEST)
        self.header.encode(w)
        w.node_id(NULL_NODE).i64(0).u32(0)  # view description
        w.u32(0)  # no per-node reference cap
        w.i32(len(self.nodes))
        for nid in self.nodes:
            w.node_id(nid)
            w.u32(0)  # browse direction: forward
            w.node_id(NULL_NODE)  # any reference type
            w.boolean(True)  # include subtypes
            w.u32(0)  # node class mask: all
            w.u32(0x3F)  # result mask: everything
    @classmethod
    def decode(cls, r: Reader) -> "BrowseRequest":
        header = RequestHeader.decode(r)
        r.node_id()
        r.i64()
        r.u32()
        r.u32()
        n = r.i32()
        nodes = []
        for _ in range(max(0, n)):
            nodes.append(r.node_id())
            r.u32()
            r.node_id()
            r.boolean()
            r.u32()
            r.u32()
        return cls(header=header, nodes=nodes)


@dataclass
class ReferenceDescription:
    node_id: NodeId
    browse_name: str
    display_name: str
    node_class: int

    def encode(self, w: Writer) -> None:
        w.node_id(NodeId(0, 47))  # HasComponent
        w.boolean(True)
        w.expanded_node_id(self.node_id)
        w.qualified_name(self.node_id.namespace_index, self.browse_name)
        w.localized_text(self.display_name)
        w.u32(self.node_class)
        w.expanded_node_id(NULL_NODE)

    @classmethod
    def decode(cls, r: Reader) -> "ReferenceDescription":
        r.node_id()
        r.boolean()
        nid = r.expanded_node_id()
        _, browse_name = r.qualified_name()
        display_name = r.localized_text() or browse_name
        node_class = r.u32()
        r.expanded_node_id()
        return cls(node_id=nid, browse_name=browse_name,
                   display_name=display_name, node_class=node_class)


@dataclass
class BrowseResult:
    status: int
    references: list[ReferenceDescription] = field(default_factory=list)

    def encode(self, w: Writer) -> None:
        w.u32(self.status)
        w.bytestring(None)  # continuation point
        w.i32(len(self.references))
        for ref in self.references:
            ref.encode(w)

    @classmethod
    def decode(cls, r: Reader) -> "BrowseResult":
        status = r.u32()
        r.bytestring()
        n = r.i32()
        refs = [ReferenceDescription.decode(r) for _ in range(max(0, n))]
        return cls(status=status, references=refs)


@dataclass
class BrowseResponse:
    header: ResponseHeader
    results: list[BrowseResult] = field(default_factory=list)

    def encode(self, w: Writer) -> None:
        write_type_id(w, BROWSE_RESPONSE)
        self.header.encode(w)
        w.i32(len(self.results))
        for res in self.results:
            res.encode(w)
        w.i32(-1)  # diagnostic infos

    @classmethod
    def decode(cls, r: Reader) -> "BrowseResponse":
        header = ResponseHeader.decode(r)
        n = r.i32()
        results = [BrowseResult.decode(r) for _ in range(max(0, n))]
        n = r.i32()
        for _ in range(max(0, n)):
            r.diagnostic_info()
        return cls(header=header, results=results)


# -- read / write -------------------------------------------------------------


@dataclass
class ReadRequest:
    header: RequestHeader
    nodes: list[tuple[NodeId, int]]  # (node id, attribute id)

    def encode(self, w: Writer) -> None:
        write_type_id(w, READ_REQUEST)
        self.header.encode(w)
        w.f64(0.0)  # max age
        w.u32(3)  # timestamps to return: neither
        w.i32(len(self.nodes))
        for nid, attr in self.nodes:
            w.node_id(nid)
            w.u32(attr)
            w.string(None)  # index range
            w.qualified_name(0, None)  # data encoding

    @classmethod
    def decode(cls, r: Reader) -> "ReadRequest":
        header = RequestHeader.decode(r)
        r.f64()
        r.u32()
        n = r.i32()
        nodes = []
        for _ in range(max(0, n)):
            nid = r.node_id()
            attr = r.u32()
            r.string()
            r.qualified_name()
            nodes.append((nid, attr))
        return cls(header=header, nodes=nodes)


@dataclass
class ReadResponse:
    header: ResponseHeader
    results: list[DataValue] = field(default_factory=list)

    def encode(self, w: Writer) -> None:
        write_type_id(w, READ_RESPONSE)
        self.header.encode(w)
        w.i32(len(self.results))
        for dv in self.results:
            dv.encode(w)
        w.i32(-1)

    @classmethod
    def decode(cls, r: Reader) -> "ReadResponse":
        header = ResponseHeader.decode(r)
        n = r.i32()
        results = [DataValue.decode(r) for _ in range(max(0, n))]
        n = r.i32()
        for _ in range(max(0, n)):
            r.diagnostic_info()
        return cls(header=header, results=results)


@dataclass
class WriteRequest:
    header: RequestHeader
    nodes: list[tuple[NodeId, VariantValue]]

    def encode(self, w: Writer) -> None:
        write_type_id(w, WRITE_REQUEST)
        self.header.encode(w)
        w.i32(len(self.nodes))
        for nid, value in self.nodes:
            w.node_id(nid)
            w.u32(ATTR_VALUE)
            w.string(None)
            DataValue(value=value).encode(w)

    @classmethod
    def decode(cls, r: Reader) -> "WriteRequest":
        header = RequestHeader.decode(r)
        n = r.i32()
        nodes = []
        for _ in range(max(0, n)):
            nid = r.node_id()
            attr = r.u32()
            r.string()
            dv = DataValue.decode(r)
            if attr != ATTR_VALUE or dv.value is None:
                raise WireError("only value-attribute writes are in the subset")
            nodes.append((nid, dv.value))
        return cls(header=header, nodes=nodes)


@dataclass
class WriteResponse:
    header: ResponseHeader
    results: list[int] = field(default_factory=list)

    def encode(self, w: Writer) -> None:
        write_type_id(w, WRITE_RESPONSE)
        self.header.encode(w)
        w.i32(len(self.results))
        for status in self.results:
            w.u32(status)
        w.i32(-1)

    @classmethod
    def decode(cls, r: Reader) -> "WriteResponse":
        header = ResponseHeader.decode(r)
        n = r.i32()
        results = [r.u32() for _ in range(max(0, n))]
        n = r.i32()
        for _ in range(max(0, n)):
            r.diagnostic_info()
        return cls(header=header, results=results)


@dataclass
class ServiceFaultMessage:
    header: ResponseHeader

    def encode(self, w: Writer) -> None:
        write_type_id(w, SERVICE_FAULT)
        self.header.encode(w)

    @classmethod
    def decode(cls, r: Reader) -> "ServiceFaultMessage":
        return cls(header=ResponseHeader.decode(r))
