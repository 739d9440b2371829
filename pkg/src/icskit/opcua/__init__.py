"""Minimal OPC UA binary protocol subset: client, server, and model.

Speaks the opc.tcp binary encoding with single-chunk messages and
SecurityPolicy None. Client/server interoperability is guaranteed between
this package's two halves; conformance with third-party stacks is
best-effort.
"""

from icskit.opcua.types import (
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
    OpcUaError,
    AccessDenied,
    ServiceFault,
    SessionClosed,
    Timeout,
    TypeMismatch,
    Unsupported,
    VariantType,
    VariantValue,
)
from icskit.opcua.client import (
    BrowseTree,
    SessionHandle,
    VariableProfile,
    browse_nodes,
    close_session,
    enumerate_variables,
    establish_session,
    get_endpoints,
    read_node,
    write_node,
)
from icskit.opcua.model import (
    AddressSpace,
    UaNode,
    build_production_line_model,
    load_model,
)
from icskit.opcua.server import AuthConfig, OpcUaSimulator, serve_opcua

__all__ = [
    "AccessDenied",
    "AccessLevel",
    "AddressSpace",
    "AuthConfig",
    "AuthRejected",
    "BrowseTree",
    "ConnectionRefused",
    "EndpointInfo",
    "HandshakeRejected",
    "InvalidEndpointUrl",
    "NodeClass",
    "NodeDescriptor",
    "NodeId",
    "NodeUnknown",
    "OpcUaError",
    "OpcUaSimulator",
    "ServiceFault",
    "SessionClosed",
    "SessionHandle",
    "Timeout",
    "TypeMismatch",
    "Unsupported",
    "UaNode",
    "VariableProfile",
    "VariantType",
    "VariantValue",
    "browse_nodes",
    "build_production_line_model",
    "close_session",
    "enumerate_variables",
    "establish_session",
    "get_endpoints",
    "load_model",
    "read_node",
    "serve_opcua",
    "write_node",
]
