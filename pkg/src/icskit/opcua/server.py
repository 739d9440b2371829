"""OPC UA server over the binary connection protocol (policy None only)."""

from __future__ import annotations

import itertools
import logging
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, field

from icskit.opcua import services as svc
from icskit.opcua.model import AddressSpace, ProductionLineModel
from icskit.opcua.types import (
    NodeId,
    SECURITY_POLICY_NONE_URI,
    Status,
    TokenType,
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

logger = logging.getLogger(__name__)

DEFAULT_OPCUA_PORT = 4840


class BindFailure(OSError):
    """Server could not bind its listen address."""


@dataclass
class AuthConfig:
    """Accepted identities. Empty users means no username endpoint."""

    anonymous: bool = True
    users: dict[str, str] = field(default_factory=dict)

    def token_policies(self) -> list[svc.UserTokenPolicy]:
        policies = []
        if self.anonymous:
            policies.append(svc.UserTokenPolicy("anonymous", TokenType.ANONYMOUS))
        if self.users:
            policies.append(svc.UserTokenPolicy("username", TokenType.USERNAME_PASSWORD))
        if not policies:
            raise ValueError("auth config must accept at least one token type")
        return policies


@dataclass
class _Session:
    session_id: NodeId
    auth_token: NodeId
    activated: bool = False
    identity: str = ""


class _ServerState:
    def __init__(self, space: AddressSpace, auth: AuthConfig, endpoint_url: str):
        self.space = space
        self.auth = auth
        self.endpoint_url = endpoint_url
        self.lock = threading.Lock()
        self.sessions: dict[NodeId, _Session] = {}
        self._channel_ids = itertools.count(1)
        self._session_ids = itertools.count(1000)

    def next_channel_id(self) -> int:
        with self.lock:
            return next(self._channel_ids)

    def create_session(self) -> _Session:
        with self.lock:
            n = next(self._session_ids)
            session = _Session(
                session_id=NodeId(1, n),
                auth_token=NodeId(1, 0x7FFF0000 + n),
            )
            self.sessions[session.auth_token] = session
            return session

    def find_session(self, auth_token: NodeId) -> _Session | None:
        with self.lock:
            return self.sessions.get(auth_token)

    def drop_session(self, auth_token: NodeId) -> None:
        with self.lock:
            self.sessions.pop(auth_token, None)

    def endpoint_description(self) -> svc.EndpointDescription:
        return svc.EndpointDescription(
            endpoint_url=self.endpoint_url,
            security_mode=1,  # None
            security_policy_uri=SECURITY_POLICY_NONE_URI,
            user_tokens=self.auth.token_policies(),
        )


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        state: _ServerState = self.server.state  # type: ignore[attr-defined]
        sock: socket.socket = self.request
        sock.settimeout(30.0)
        channel_id = 0
        token_id = 0
        try:
            msg_type, body = read_message(sock)
            if msg_type != MSG_HELLO:
                self._send_error(sock, Status.BAD_TCP_MESSAGE_TYPE_INVALID, "expected Hello")
                return
            self._send_ack(sock, body)

            while True:
                msg_type, body = read_message(sock)
                if msg_type == MSG_OPEN:
                    opened = self._handle_open(sock, state, body)
                    if opened is None:
                        return
                    channel_id, token_id = opened
                elif msg_type == MSG_MSG:
                    if not self._handle_msg(sock, state, body, channel_id, token_id):
                        return
                elif msg_type == MSG_CLOSE:
                    return
                else:
                    self._send_error(sock, Status.BAD_TCP_MESSAGE_TYPE_INVALID,
                                     f"unexpected {msg_type!r}")
                    return
        except (WireError, ConnectionError, socket.timeout, OSError):
            return

    # -- transport steps ----------------------------------------------------

    def _send_ack(self, sock: socket.socket, hello_body: bytes) -> None:
        r = Reader(hello_body)
        r.u32()  # client protocol version
        recv_buf = r.u32()
        send_buf = r.u32()
        w = Writer()
        w.u32(0)
        w.u32(min(send_buf or (1 << 16), 1 << 22))
        w.u32(min(recv_buf or (1 << 16), 1 << 22))
        w.u32(1 << 22)  # max message size
        w.u32(1)  # max chunk count: single chunk
        write_message(sock, MSG_ACK, w.data())

    def _send_error(self, sock: socket.socket, code: int, reason: str) -> None:
        w = Writer()
        w.u32(code)
        w.string(reason)
        try:
            write_message(sock, MSG_ERROR, w.data())
        except OSError:
            pass

    def _handle_open(self, sock, state: _ServerState, body: bytes):
        r = Reader(body)
        r.u32()  # secure channel id (0 on issue)
        policy_uri = r.string()
        r.bytestring()  # sender certificate
        r.bytestring()  # receiver certificate thumbprint
        seq_num = r.u32()
        req_id = r.u32()
        if policy_uri != SECURITY_POLICY_NONE_URI:
            self._send_error(sock, Status.BAD_SECURITY_POLICY_REJECTED,
                             f"unsupported security policy {policy_uri!r}")
            return None
        type_id = svc.read_type_id(r)
        if type_id != svc.OPEN_SECURE_CHANNEL_REQUEST:
            self._send_error(sock, Status.BAD_TCP_MESSAGE_TYPE_INVALID, "expected OPN request")
            return None
        request = svc.OpenSecureChannelRequest.decode(r)
        channel_id = state.next_channel_id()
        token_id = 1
        response = svc.OpenSecureChannelResponse(
            header=svc.ResponseHeader(request_handle=request.header.request_handle),
            channel_id=channel_id,
            token_id=token_id,
        )
        w = Writer()
        w.u32(channel_id)
        w.string(SECURITY_POLICY_NONE_URI)
        w.bytestring(None)
        w.bytestring(None)
        w.u32(seq_num)
        w.u32(req_id)
        response.encode(w)
        write_message(sock, MSG_OPEN, w.data())
        return channel_id, token_id

    def _handle_msg(self, sock, state: _ServerState, body: bytes,
                    channel_id: int, token_id: int) -> bool:
        r = Reader(body)
        msg_channel = r.u32()
        msg_token = r.u32()
        seq_num = r.u32()
        req_id = r.u32()
        if msg_channel != channel_id or msg_token != token_id:
            self._send_error(sock, Status.BAD_TCP_MESSAGE_TYPE_INVALID, "unknown channel")
            return False
        type_id = svc.read_type_id(r)
        payload = self._dispatch(state, type_id, r)
        w = Writer()
        w.u32(channel_id)
        w.u32(token_id)
        w.u32(seq_num)
        w.u32(req_id)
        w.raw(payload)
        write_message(sock, MSG_MSG, w.data())
        return True

    # -- services -------------------------------------------------------------

    def _dispatch(self, state: _ServerState, type_id: int, r: Reader) -> bytes:
        w = Writer()
        try:
            if type_id == svc.GET_ENDPOINTS_REQUEST:
                request = svc.GetEndpointsRequest.decode(r)
                svc.GetEndpointsResponse(
                    header=svc.ResponseHeader(request_handle=request.header.request_handle),
                    endpoints=[state.endpoint_description()],
                ).encode(w)
            elif type_id == svc.CREATE_SESSION_REQUEST:
                request = svc.CreateSessionRequest.decode(r)
                session = state.create_session()
                svc.CreateSessionResponse(
                    header=svc.ResponseHeader(request_handle=request.header.request_handle),
                    session_id=session.session_id,
                    auth_token=session.auth_token,
                    endpoints=[state.endpoint_description()],
                ).encode(w)
            elif type_id == svc.ACTIVATE_SESSION_REQUEST:
                request = svc.ActivateSessionRequest.decode(r)
                self._activate(state, request, w)
            elif type_id == svc.CLOSE_SESSION_REQUEST:
                request = svc.CloseSessionRequest.decode(r)
                state.drop_session(request.header.auth_token)
                svc.CloseSessionResponse(
                    header=svc.ResponseHeader(request_handle=request.header.request_handle)
                ).encode(w)
            elif type_id == svc.BROWSE_REQUEST:
                request = svc.BrowseRequest.decode(r)
                self._with_session(state, request.header, w,
                                   lambda: self._browse(state, request, w))
            elif type_id == svc.READ_REQUEST:
                request = svc.ReadRequest.decode(r)
                self._with_session(state, request.header, w,
                                   lambda: self._read(state, request, w))
            elif type_id == svc.WRITE_REQUEST:
                request = svc.WriteRequest.decode(r)
                self._with_session(state, request.header, w,
                                   lambda: self._write(state, request, w))
            else:
                header = svc.RequestHeader.decode(r)
                svc.ServiceFaultMessage(
                    header=svc.ResponseHeader(
                        service_result=Status.BAD_SERVICE_UNSUPPORTED,
                        request_handle=header.request_handle,
                    )
                ).encode(w)
        except WireError:
            w = Writer()
            svc.ServiceFaultMessage(
                header=svc.ResponseHeader(service_result=Status.BAD_UNEXPECTED)
            ).encode(w)
        return w.data()

    def _with_session(self, state: _ServerState, header: svc.RequestHeader,
                      w: Writer, action) -> None:
        session = state.find_session(header.auth_token)
        if session is None or not session.activated:
            svc.ServiceFaultMessage(
                header=svc.ResponseHeader(
                    service_result=Status.BAD_SESSION_ID_INVALID,
                    request_handle=header.request_handle,
                )
            ).encode(w)
            return
        action()

    def _activate(self, state: _ServerState, request: svc.ActivateSessionRequest,
                  w: Writer) -> None:
        session = state.find_session(request.header.auth_token)
        if session is None:
            svc.ServiceFaultMessage(
                header=svc.ResponseHeader(
                    service_result=Status.BAD_SESSION_ID_INVALID,
                    request_handle=request.header.request_handle,
                )
            ).encode(w)
            return
        identity = request.identity
        if len(identity) == 1:
            allowed = state.auth.anonymous
            who = "anonymous"
        else:
            _, user, password = identity
            allowed = state.auth.users.get(user) == password
            who = user
        if not allowed:
            svc.ServiceFaultMessage(
                header=svc.ResponseHeader(
                    service_result=Status.BAD_IDENTITY_TOKEN_REJECTED,
                    request_handle=request.header.request_handle,
                )
            ).encode(w)
            return
        session.activated = True
        session.identity = who
        svc.ActivateSessionResponse(
            header=svc.ResponseHeader(request_handle=request.header.request_handle)
        ).encode(w)

    def _browse(self, state: _ServerState, request: svc.BrowseRequest, w: Writer) -> None:
        results = []
        for nid in request.nodes:
            node = state.space.get(nid)
            if node is None:
                results.append(svc.BrowseResult(status=Status.BAD_NODE_ID_UNKNOWN))
                continue
            refs = []
            for child_id in node.children:
                child = state.space.get(child_id)
                if child is None:
                    continue
                refs.append(
                    svc.ReferenceDescription(
                        node_id=child.node_id,
                        browse_name=child.browse_name,
                        display_name=child.display_name,
                        node_class=int(child.node_class),
                    )
                )
            results.append(svc.BrowseResult(status=Status.GOOD, references=refs))
        svc.BrowseResponse(
            header=svc.ResponseHeader(request_handle=request.header.request_handle),
            results=results,
        ).encode(w)

    def _read(self, state: _ServerState, request: svc.ReadRequest, w: Writer) -> None:
        results = []
        for nid, attr in request.nodes:
            node = state.space.get(nid)
            if node is None:
                results.append(svc.DataValue(status=Status.BAD_NODE_ID_UNKNOWN))
            elif attr == svc.ATTR_VALUE:
                if node.value is None and node.value_fn is None:
                    results.append(svc.DataValue(status=Status.BAD_ATTRIBUTE_ID_INVALID))
                elif not node.access.readable:
                    results.append(svc.DataValue(status=Status.BAD_NOT_READABLE))
                else:
                    results.append(svc.DataValue(value=state.space.read_value(nid)))
            elif attr == svc.ATTR_DISPLAY_NAME:
                results.append(svc.DataValue(value=VariantValue.string(node.display_name)))
            elif attr == svc.ATTR_BROWSE_NAME:
                results.append(svc.DataValue(value=VariantValue.string(node.browse_name)))
            elif attr == svc.ATTR_ACCESS_LEVEL:
                results.append(svc.DataValue(value=VariantValue.int32(node.access.to_byte())))
            else:
                results.append(svc.DataValue(status=Status.BAD_ATTRIBUTE_ID_INVALID))
        svc.ReadResponse(
            header=svc.ResponseHeader(request_handle=request.header.request_handle),
            results=results,
        ).encode(w)

    def _write(self, state: _ServerState, request: svc.WriteRequest, w: Writer) -> None:
        results = []
        for nid, value in request.nodes:
            node = state.space.get(nid)
            if node is None:
                results.append(Status.BAD_NODE_ID_UNKNOWN)
            elif not node.access.writable:
                results.append(Status.BAD_USER_ACCESS_DENIED)
            elif node.data_type is not None and value.type is not node.data_type:
                results.append(Status.BAD_TYPE_MISMATCH)
            else:
                state.space.set_value(nid, value)
                results.append(Status.GOOD)
        svc.WriteResponse(
            header=svc.ResponseHeader(request_handle=request.header.request_handle),
            results=results,
        ).encode(w)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    # scanners and concurrent sessions connect in bursts; the default
    # backlog of 5 drops SYNs
    request_queue_size = 64


class OpcUaSimulator:
    """Running server handle: endpoint URL, model access, shutdown."""

    def __init__(self, host: str, port: int,
                 model: ProductionLineModel | AddressSpace,
                 auth: AuthConfig | None = None,
                 sensor_tick_interval: float = 1.0):
        if isinstance(model, ProductionLineModel):
            self.model = model
            space = model.space
            self._ticker = model.make_ticker()
        else:
            self.model = None
            space = model
            self._ticker = None
        self.auth = auth or AuthConfig()
        try:
            self._server = _Server((host, port), _Handler)
        except OSError as e:
            raise BindFailure(f"cannot bind {host}:{port}: {e}") from e
        bound_host, bound_port = self._server.server_address[:2]
        self.endpoint_url = f"opc.tcp://{bound_host}:{bound_port}/server/"
        self._server.state = _ServerState(space, self.auth, self.endpoint_url)  # type: ignore[attr-defined]
        self.space = space
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._tick_interval = sensor_tick_interval
        self._stop_tick = threading.Event()
        self._tick_thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> "OpcUaSimulator":
        self._thread.start()
        if self._ticker is not None:
            self._tick_thread = threading.Thread(target=self._tick_loop, daemon=True)
            self._tick_thread.start()
        return self

    def _tick_loop(self) -> None:
        while not self._stop_tick.wait(self._tick_interval):
            try:
                self._ticker()
            except Exception:
                logger.exception("sensor ticker failed")

    def stop(self) -> None:
        self._stop_tick.set()
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "OpcUaSimulator":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_opcua(
    bind: tuple[str, int],
    model: ProductionLineModel | AddressSpace,
    auth_config: AuthConfig | None = None,
) -> OpcUaSimulator:
    """Start an OPC UA server on `bind` and return its running handle."""
    host, port = bind
    return OpcUaSimulator(host, port, model, auth=auth_config).start()
