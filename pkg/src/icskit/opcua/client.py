"""OPC UA client: session setup, endpoint listing, browse, enumerate,
read, and write over the binary protocol."""

from __future__ import annotations

import socket
import threading
from collections import deque
from dataclasses import dataclass, field
from urllib.parse import urlparse

from icskit.opcua import services as svc
from icskit.opcua.types import (
    AccessDenied,
    AccessLevel,
    AuthRejected,
    ConnectionRefused,
    EndpointInfo,
    HandshakeRejected,
    InvalidEndpointUrl,
    NodeClass,
    NodeDescriptor,
    NodeId,
    NodeUnknown,
    OBJECTS_NODE,
    POLICY_URI_NAMES,
    SECURITY_POLICY_NONE_URI,
    ServiceFault,
    SessionClosed,
    Status,
    Timeout,
    TypeMismatch,
    TokenType,
    VariantType,
    VariantValue,
)
from icskit.opcua.wire import (
    MSG_ACK,
    MSG_CLOSE,
    MSG_ERROR,
    MSG_HELLO,
    MSG_MSG,
    MSG_OPEN,
    Reader,
    WireError,
    Writer,
    read_message,
    write_message,
)

DEFAULT_TIMEOUT_S = 5.0
DEFAULT_BROWSE_DEPTH = 5
DEFAULT_BROWSE_MAX_NODES = 500

_TOKEN_NAMES = {
    TokenType.ANONYMOUS: "Anonymous",
    TokenType.USERNAME_PASSWORD: "UsernamePassword",
    TokenType.CERTIFICATE: "Certificate",
    TokenType.ISSUED_TOKEN: "IssuedToken",
}
_MODE_NAMES = {1: "None", 2: "Sign", 3: "SignAndEncrypt"}

_WRITE_STATUS_ERRORS = {
    Status.BAD_NODE_ID_UNKNOWN: NodeUnknown,
    Status.BAD_USER_ACCESS_DENIED: AccessDenied,
    Status.BAD_NOT_WRITABLE: AccessDenied,
    Status.BAD_NOT_READABLE: AccessDenied,
    Status.BAD_TYPE_MISMATCH: TypeMismatch,
}


def parse_endpoint_url(url: str) -> tuple[str, int, str]:
    """Validate an opc.tcp URL and return (host, port, path)."""
    parsed = urlparse(url)
    if parsed.scheme != "opc.tcp":
        raise InvalidEndpointUrl(f"URL scheme must be opc.tcp, got {url!r}")
    if not parsed.hostname:
        raise InvalidEndpointUrl(f"URL {url!r} has no host")
    try:
        port = parsed.port or 4840
    except ValueError as e:
        raise InvalidEndpointUrl(f"URL {url!r} has an invalid port") from e
    return parsed.hostname, port, parsed.path or "/"


class _Channel:
    """Hello/Ack handshake plus an open secure channel on one socket."""

    def __init__(self, endpoint_url: str, timeout_s: float = DEFAULT_TIMEOUT_S):
        host, port, _ = parse_endpoint_url(endpoint_url)
        self.endpoint_url = endpoint_url
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout_s)
        except socket.timeout as e:
            raise Timeout(f"connect to {host}:{port} timed out") from e
        except OSError as e:
            raise ConnectionRefused(f"connect to {host}:{port} failed: {e}") from e
        self.channel_id = 0
        self.token_id = 0
        self._seq = 0
        self._req = 0
        try:
            self._handshake()
            self._open_channel()
        except (Timeout, HandshakeRejected):
            self.sock.close()
            raise

    def _next_seq(self) -> tuple[int, int]:
        self._seq += 1
        self._req += 1
        return self._seq, self._req

    def _read(self) -> tuple[bytes, bytes]:
        try:
            return read_message(self.sock)
        except socket.timeout as e:
            raise Timeout("no response within timeout") from e
        except (ConnectionError, OSError) as e:
            raise ConnectionRefused(f"connection lost: {e}") from e

    def _handshake(self) -> None:
        w = Writer()
        w.u32(0)  # protocol version
        w.u32(1 << 22)
        w.u32(1 << 22)
        w.u32(1 << 22)
        w.u32(1)  # single chunk
        w.string(self.endpoint_url)
        write_message(self.sock, MSG_HELLO, w.data())
        msg_type, body = self._read()
        if msg_type == MSG_ERROR:
            raise HandshakeRejected(_error_reason(body))
        if msg_type != MSG_ACK:
            raise HandshakeRejected(f"expected Acknowledge, got {msg_type!r}")

    def _open_channel(self) -> None:
        seq, req = self._next_seq()
        w = Writer()
        w.u32(0)  # channel id not assigned yet
        w.string(SECURITY_POLICY_NONE_URI)
        w.bytestring(None)
        w.bytestring(None)
        w.u32(seq)
        w.u32(req)
        svc.OpenSecureChannelRequest().encode(w)
        write_message(self.sock, MSG_OPEN, w.data())
        msg_type, body = self._read()
        if msg_type == MSG_ERROR:
            raise HandshakeRejected(_error_reason(body))
        if msg_type != MSG_OPEN:
            raise HandshakeRejected(f"expected OPN response, got {msg_type!r}")
        r = Reader(body)
        r.u32()  # channel id in security header
        r.string()
        r.bytestring()
        r.bytestring()
        r.u32()
        r.u32()
        type_id = svc.read_type_id(r)
        if type_id != svc.OPEN_SECURE_CHANNEL_RESPONSE:
            raise HandshakeRejected("malformed secure-channel response")
        response = svc.OpenSecureChannelResponse.decode(r)
        if response.header.service_result != Status.GOOD:
            raise HandshakeRejected(
                f"secure channel rejected: 0x{response.header.service_result:08x}"
            )
        self.channel_id = response.channel_id
        self.token_id = response.token_id

    def call(self, encode_fn, expected_type: int) -> Reader:
        """Send one service request and return a reader over the response
        payload, positioned after the type id. Raises ServiceFault."""
        seq, req = self._next_seq()
        w = Writer()
        w.u32(self.channel_id)
        w.u32(self.token_id)
        w.u32(seq)
        w.u32(req)
        encode_fn(w)
        write_message(self.sock, MSG_MSG, w.data())
        msg_type, body = self._read()
        if msg_type == MSG_ERROR:
            raise ServiceFault(Status.BAD_UNEXPECTED, _error_reason(body))
        if msg_type != MSG_MSG:
            raise ServiceFault(Status.BAD_UNEXPECTED, f"unexpected {msg_type!r}")
        r = Reader(body)
        r.u32()  # channel id
        r.u32()  # token id
        r.u32()  # sequence number
        r.u32()  # request id
        type_id = svc.read_type_id(r)
        if type_id == svc.SERVICE_FAULT:
            fault = svc.ServiceFaultMessage.decode(r)
            raise ServiceFault(fault.header.service_result)
        if type_id != expected_type:
            raise ServiceFault(Status.BAD_UNEXPECTED, f"unexpected response type {type_id}")
        return r

    def close(self) -> None:
        try:
            w = Writer()
            w.u32(self.channel_id)
            w.u32(self.token_id)
            seq, req = self._next_seq()
            w.u32(seq)
            w.u32(req)
            svc.write_type_id(w, svc.CLOSE_SECURE_CHANNEL_REQUEST)
            svc.RequestHeader().encode(w)
            write_message(self.sock, MSG_CLOSE, w.data())
        except OSError:
            pass
        finally:
            self.sock.close()


def _error_reason(body: bytes) -> str:
    r = Reader(body)
    code = r.u32()
    reason = r.string() or ""
    return f"0x{code:08x} {reason}".strip()


@dataclass
class SessionHandle:
    """Open session: channel, auth token, and identity. One in-flight
    service call at a time (internally serialized); safe to hand between
    threads."""

    endpoint_url: str
    identity: str
    _channel: _Channel
    _auth_token: NodeId
    closed: bool = False
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def call(self, encode_fn, expected_type: int) -> Reader:
        if self.closed:
            raise SessionClosed("session handle is closed")
        with self._lock:
            return self._channel.call(encode_fn, expected_type)

    def request_header(self) -> svc.RequestHeader:
        return svc.RequestHeader(auth_token=self._auth_token)


@dataclass
class VariableProfile:
    """Variable node metadata captured during enumeration."""

    node_id: NodeId
    display_name: str
    data_type: VariantType | None
    access: AccessLevel
    current_value: VariantValue | None


@dataclass
class BrowseTree:
    """Browse result: descriptor tree plus traversal accounting."""

    root: NodeDescriptor
    node_count: int
    truncated: bool


def get_endpoints(endpoint_url: str, timeout_s: float = DEFAULT_TIMEOUT_S) -> list[EndpointInfo]:
    """List every endpoint the server advertises."""
    channel = _Channel(endpoint_url, timeout_s)
    try:
        def encode(w: Writer) -> None:
            svc.GetEndpointsRequest(endpoint_url=endpoint_url).encode(w)

        r = channel.call(encode, svc.GET_ENDPOINTS_RESPONSE)
        response = svc.GetEndpointsResponse.decode(r)
    finally:
        channel.close()
    infos = []
    for ep in response.endpoints:
        tokens = {_TOKEN_NAMES.get(TokenType(t.token_type), str(t.token_type))
                  for t in ep.user_tokens}
        infos.append(
            EndpointInfo(
                url=ep.endpoint_url,
                security_policy=POLICY_URI_NAMES.get(ep.security_policy_uri,
                                                     ep.security_policy_uri),
                security_mode=_MODE_NAMES.get(ep.security_mode, str(ep.security_mode)),
                token_types=tokens or {"Anonymous"},
            )
        )
    return infos


def establish_session(
    endpoint_url: str,
    auth: tuple[str, str] | None = None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> SessionHandle:
    """Open a channel, create a session, and activate it.

    `auth` is None for anonymous or a (username, password) pair.
    """
    channel = _Channel(endpoint_url, timeout_s)
    try:
        def encode_create(w: Writer) -> None:
            svc.CreateSessionRequest(endpoint_url=endpoint_url).encode(w)

        r = channel.call(encode_create, svc.CREATE_SESSION_RESPONSE)
        created = svc.CreateSessionResponse.decode(r)
        if created.header.service_result != Status.GOOD:
            raise ServiceFault(created.header.service_result)
        auth_token = created.auth_token

        if auth is None:
            identity: tuple = ("anonymous",)
            who = "anonymous"
        else:
            identity = ("username", auth[0], auth[1])
            who = auth[0]

        def encode_activate(w: Writer) -> None:
            svc.ActivateSessionRequest(
                header=svc.RequestHeader(auth_token=auth_token),
                identity=identity,
            ).encode(w)

        try:
            channel.call(encode_activate, svc.ACTIVATE_SESSION_RESPONSE)
        except ServiceFault as e:
            if e.status in (Status.BAD_IDENTITY_TOKEN_REJECTED,
                            Status.BAD_IDENTITY_TOKEN_INVALID,
                            Status.BAD_USER_ACCESS_DENIED):
                raise AuthRejected(f"identity rejected for {who!r}") from e
            raise
    except Exception:
        channel.close()
        raise
    return SessionHandle(
        endpoint_url=endpoint_url,
        identity=who,
        _channel=channel,
        _auth_token=auth_token,
    )


def close_session(session: SessionHandle) -> None:
    """Close the session and its channel; idempotent."""
    if session.closed:
        return
    session.closed = True
    try:
        def encode(w: Writer) -> None:
            svc.CloseSessionRequest(header=session.request_header()).encode(w)

        session._channel.call(encode, svc.CLOSE_SESSION_RESPONSE)
    except (ServiceFault, ConnectionRefused, Timeout, WireError):
        pass
    finally:
        session._channel.close()


def _browse_children(session: SessionHandle, node_id: NodeId) -> list[svc.ReferenceDescription]:
    def encode(w: Writer) -> None:
        svc.BrowseRequest(header=session.request_header(), nodes=[node_id]).encode(w)

    r = session.call(encode, svc.BROWSE_RESPONSE)
    response = svc.BrowseResponse.decode(r)
    if not response.results:
        return []
    result = response.results[0]
    if result.status != Status.GOOD:
        return []
    return result.references


def browse_nodes(
    session: SessionHandle,
    root: NodeId = OBJECTS_NODE,
    depth: int = DEFAULT_BROWSE_DEPTH,
    max_nodes: int = DEFAULT_BROWSE_MAX_NODES,
) -> BrowseTree:
    """Breadth-first browse from `root`, bounded by depth and node budget.

    A visited set keeps the traversal acyclic; the budget counts every
    descriptor returned, the root included.
    """
    if depth < 1 or max_nodes < 1:
        raise ValueError("depth and max_nodes must be positive")
    root_node = NodeDescriptor(node_id=root, browse_name=_root_name(root),
                               node_class=NodeClass.OBJECT)
    visited = {root}
    count = 1
    truncated = False
    queue: deque[tuple[NodeDescriptor, int]] = deque([(root_node, 0)])
    while queue:
        descriptor, level = queue.popleft()
        if level >= depth:
            continue
        for ref in _browse_children(session, descriptor.node_id):
            if ref.node_id in visited:
                continue
            if count >= max_nodes:
                truncated = True
                queue.clear()
                break
            visited.add(ref.node_id)
            child = NodeDescriptor(
                node_id=ref.node_id,
                browse_name=ref.browse_name,
                node_class=NodeClass(ref.node_class) if ref.node_class in
                (1, 2, 4) else NodeClass.OBJECT,
            )
            descriptor.children.append(child)
            count += 1
            queue.append((child, level + 1))
    return BrowseTree(root=root_node, node_count=count, truncated=truncated)


def _root_name(root: NodeId) -> str:
    return "Objects" if root == OBJECTS_NODE else str(root)


def _read_attributes(session: SessionHandle, node_id: NodeId,
                     attrs: list[int]) -> list[svc.DataValue]:
    def encode(w: Writer) -> None:
        svc.ReadRequest(
            header=session.request_header(),
            nodes=[(node_id, attr) for attr in attrs],
        ).encode(w)

    r = session.call(encode, svc.READ_RESPONSE)
    return svc.ReadResponse.decode(r).results


def enumerate_variables(session: SessionHandle, namespace_index: int) -> list[VariableProfile]:
    """Profile every Variable node whose namespace index matches."""
    tree = browse_nodes(session, depth=64, max_nodes=100_000)
    profiles = []

    def walk(descriptor: NodeDescriptor) -> None:
        if (descriptor.node_class is NodeClass.VARIABLE
                and descriptor.namespace_index == namespace_index):
            values = _read_attributes(
                session, descriptor.node_id,
                [svc.ATTR_DISPLAY_NAME, svc.ATTR_VALUE, svc.ATTR_ACCESS_LEVEL],
            )
            display = descriptor.browse_name
            if values[0].value is not None and values[0].value.type is VariantType.STRING:
                display = str(values[0].value.value)
            current = values[1].value
            access = AccessLevel(readable=True, writable=False)
            if values[2].value is not None and values[2].value.type is VariantType.INT32:
                access = AccessLevel.from_byte(int(values[2].value.value))
            profiles.append(
                VariableProfile(
                    node_id=descriptor.node_id,
                    display_name=display,
                    data_type=current.type if current is not None else None,
                    access=access,
                    current_value=current,
                )
            )
        for child in descriptor.children:
            walk(child)

    walk(tree.root)
    return profiles


def read_node(session: SessionHandle, node_id: NodeId) -> VariantValue:
    """Read a node's current value."""
    results = _read_attributes(session, node_id, [svc.ATTR_VALUE])
    if not results:
        raise ServiceFault(Status.BAD_UNEXPECTED, "empty read response")
    dv = results[0]
    if dv.status == Status.BAD_NODE_ID_UNKNOWN:
        raise NodeUnknown(f"node {node_id} unknown")
    if dv.status in (Status.BAD_NOT_READABLE, Status.BAD_USER_ACCESS_DENIED):
        raise AccessDenied(f"node {node_id} is not readable")
    if dv.status != Status.GOOD or dv.value is None:
        raise ServiceFault(dv.status or Status.BAD_UNEXPECTED)
    return dv.value


def write_node(session: SessionHandle, node_id: NodeId, value: VariantValue) -> None:
    """Write a node value; raises on any non-good per-node status."""
    def encode(w: Writer) -> None:
        svc.WriteRequest(header=session.request_header(),
                         nodes=[(node_id, value)]).encode(w)

    r = session.call(encode, svc.WRITE_RESPONSE)
    response = svc.WriteResponse.decode(r)
    if not response.results:
        raise ServiceFault(Status.BAD_UNEXPECTED, "empty write response")
    status = response.results[0]
    if status == Status.GOOD:
        return
    error = _WRITE_STATUS_ERRORS.get(status)
    if error is not None:
        raise error(f"write to {node_id} failed: 0x{status:08x}")
    raise ServiceFault(status)
