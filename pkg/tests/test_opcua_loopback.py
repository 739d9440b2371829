"""Client/server loopback: sessions, browse, enumerate, read, write."""

from __future__ import annotations

import socket
import threading
import time

import pytest

from icskit.opcua import (
    AccessDenied,
    AuthRejected,
    InvalidEndpointUrl,
    NodeClass,
    NodeId,
    NodeUnknown,
    SessionClosed,
    Timeout,
    TypeMismatch,
    VariantType,
    VariantValue,
    browse_nodes,
    build_production_line_model,
    close_session,
    enumerate_variables,
    establish_session,
    get_endpoints,
    read_node,
    serve_opcua,
    write_node,
)
from icskit.opcua.server import BindFailure
from icskit.opcua.types import OBJECTS_NODE

from tests.conftest import url_for


@pytest.fixture
def session(opcua_sim):
    handle = establish_session(url_for(opcua_sim))
    yield handle
    close_session(handle)


class TestSessionAndEndpoints:
    def test_anonymous_session(self, opcua_sim):
        handle = establish_session(url_for(opcua_sim))
        assert handle.identity == "anonymous"
        close_session(handle)

    def test_endpoint_metadata(self, opcua_sim):
        endpoints = get_endpoints(url_for(opcua_sim))
        assert len(endpoints) == 1
        ep = endpoints[0]
        assert ep.security_policy == "None"
        assert ep.security_mode == "None"
        assert ep.token_types == {"Anonymous"}

    def test_username_server_tokens(self, opcua_user_sim):
        endpoints = get_endpoints(url_for(opcua_user_sim))
        assert endpoints[0].token_types == {"UsernamePassword"}

    def test_anonymous_rejected_when_disabled(self, opcua_user_sim):
        with pytest.raises(AuthRejected):
            establish_session(url_for(opcua_user_sim))

    def test_wrong_password_rejected(self, opcua_user_sim):
        with pytest.raises(AuthRejected):
            establish_session(url_for(opcua_user_sim), auth=("operator", "nope"))

    def test_valid_credentials_accepted(self, opcua_user_sim):
        handle = establish_session(url_for(opcua_user_sim),
                                   auth=("operator", "secret"))
        assert handle.identity == "operator"
        close_session(handle)

    def test_malformed_url_rejected_before_io(self):
        with pytest.raises(InvalidEndpointUrl):
            establish_session("http://localhost:4840/")
        with pytest.raises(InvalidEndpointUrl):
            get_endpoints("opc.tcp://")

    def test_unresponsive_listener_times_out(self):
        listener = socket.socket()
        listener.bind(("127.0.0.1", 0))
        listener.listen(1)
        url = f"opc.tcp://127.0.0.1:{listener.getsockname()[1]}/"
        with pytest.raises(Timeout):
            get_endpoints(url, timeout_s=0.4)
        listener.close()

    def test_closed_handle_raises_session_closed(self, opcua_sim):
        handle = establish_session(url_for(opcua_sim))
        close_session(handle)
        with pytest.raises(SessionClosed):
            read_node(handle, NodeId(2, 20))


class TestBrowse:
    def test_depth_three_hierarchy(self, session):
        tree = browse_nodes(session, depth=3)
        factory = tree.root.children[0]
        assert factory.node_id == NodeId(2, 1)
        assert factory.browse_name == "Factory"
        line = next(c for c in factory.children if c.browse_name == "ProductionLine1")
        assert line.node_id == NodeId(2, 2)
        names = {c.browse_name for c in line.children}
        assert names == {"TemperatureSensors", "Motors"}

    def test_depth_one_direct_children_only(self, session):
        tree = browse_nodes(session, depth=1)
        assert [c.browse_name for c in tree.root.children] == ["Factory"]
        assert tree.root.children[0].children == []

    def test_max_nodes_budget_with_truncation_flag(self, session):
        tree = browse_nodes(session, depth=5, max_nodes=2)
        assert tree.node_count == 2
        assert tree.truncated

    def test_unbounded_budget_visits_each_node_once(self, session):
        tree = browse_nodes(session, depth=50, max_nodes=10_000)
        seen: list[NodeId] = []

        def walk(d):
            seen.append(d.node_id)
            for c in d.children:
                walk(c)

        walk(tree.root)
        assert len(seen) == len(set(seen))
        assert tree.node_count == len(seen)
        assert not tree.truncated


class TestEnumerate:
    def test_namespace_two_variables(self, session):
        profiles = enumerate_variables(session, 2)
        by_id = {p.node_id: p for p in profiles}
        for ident in (10, 11, 12):
            assert by_id[NodeId(2, ident)].data_type is VariantType.DOUBLE
        assert by_id[NodeId(2, 20)].data_type is VariantType.INT32
        assert by_id[NodeId(2, 21)].data_type is VariantType.BOOLEAN

    def test_uptime_read_only(self, session):
        profiles = enumerate_variables(session, 2)
        uptime = next(p for p in profiles if p.node_id == NodeId(2, 30))
        assert uptime.access.readable and not uptime.access.writable
        assert uptime.display_name == "Uptime"

    def test_absent_namespace_empty(self, session):
        assert enumerate_variables(session, 7) == []

    def test_union_over_namespaces_covers_all_variables(self, opcua_sim, session):
        all_vars = {n.node_id for n in opcua_sim.space.variables()}
        union = set()
        for ns in (0, 1, 2):
            union |= {p.node_id for p in enumerate_variables(session, ns)}
        assert union == all_vars


class TestReadWrite:
    def test_motor_speed_read(self, session):
        value = read_node(session, NodeId(2, 20))
        assert value.type is VariantType.INT32

    def test_temperature_within_model_range(self, opcua_sim, session):
        lo, hi = opcua_sim.model.temperature_range
        value = read_node(session, NodeId(2, 10))
        assert value.type is VariantType.DOUBLE
        assert lo <= value.value <= hi

    def test_write_then_read(self, session):
        write_node(session, NodeId(2, 20), VariantValue.int32(1200))
        assert read_node(session, NodeId(2, 20)).value == 1200

    def test_write_read_only_denied_and_value_unchanged(self, session):
        before = read_node(session, NodeId(2, 30)).value
        with pytest.raises(AccessDenied):
            write_node(session, NodeId(2, 30), VariantValue.double(-1.0))
        after = read_node(session, NodeId(2, 30)).value
        assert after >= before  # monotone uptime, never the written -1.0
        assert after != -1.0

    def test_type_mismatch(self, session):
        with pytest.raises(TypeMismatch):
            write_node(session, NodeId(2, 20), VariantValue.double(3.14))

    def test_unknown_node(self, session):
        with pytest.raises(NodeUnknown):
            read_node(session, NodeId(9, 999))
        with pytest.raises(NodeUnknown):
            write_node(session, NodeId(9, 999), VariantValue.int32(1))

    def test_uptime_monotone_across_reads(self, session):
        first = read_node(session, NodeId(2, 30)).value
        time.sleep(0.05)
        second = read_node(session, NodeId(2, 30)).value
        assert second >= first

    def test_boolean_status_write(self, session):
        write_node(session, NodeId(2, 21), VariantValue.boolean(False))
        assert read_node(session, NodeId(2, 21)).value is False


class TestModelConfig:
    def write_config(self, tmp_path):
        import json

        doc = {
            "auth": {"anonymous": True},
            "nodes": [
                {"id": "ns=3;i=1", "browse_name": "Pumphouse", "class": "object"},
                {"id": "ns=3;i=10", "browse_name": "PumpSpeed", "class": "variable",
                 "parent": "ns=3;i=1", "data_type": "INT32", "value": 1450,
                 "writable": True},
                {"id": "ns=3;i=11", "browse_name": "Serial", "class": "variable",
                 "parent": "ns=3;i=1", "data_type": "STRING", "value": "PH-0042",
                 "writable": False},
            ],
        }
        path = tmp_path / "model.json"
        path.write_text(json.dumps(doc))
        return path

    def test_load_model_builds_space_and_auth(self, tmp_path):
        from icskit.opcua import load_model

        space, auth = load_model(self.write_config(tmp_path))
        assert auth == {"anonymous": True}
        pump = space.get(NodeId(3, 10))
        assert pump.data_type is VariantType.INT32
        assert pump.value.value == 1450
        assert pump.access.writable
        serial = space.get(NodeId(3, 11))
        assert not serial.access.writable

    def test_config_model_served_end_to_end(self, tmp_path):
        from icskit.opcua import load_model

        space, _ = load_model(self.write_config(tmp_path))
        server = serve_opcua(("127.0.0.1", 0), space)
        try:
            session = establish_session(url_for(server))
            try:
                tree = browse_nodes(session, depth=2)
                assert tree.root.children[0].browse_name == "Pumphouse"
                write_node(session, NodeId(3, 10), VariantValue.int32(900))
                assert read_node(session, NodeId(3, 10)).value == 900
                with pytest.raises(AccessDenied):
                    write_node(session, NodeId(3, 11), VariantValue.string("x"))
            finally:
                close_session(session)
        finally:
            server.stop()


class TestModel:
    def test_namespace_two_node_count(self):
        model = build_production_line_model()
        ns2 = [n for n in model.space.nodes.values()
               if n.node_id.namespace_index == 2]
        assert len(ns2) >= 9

    def test_motor_status_nodes_boolean(self):
        model = build_production_line_model()
        for ident in (21, 23):
            node = model.space.get(NodeId(2, ident))
            assert node.data_type is VariantType.BOOLEAN
            assert node.node_class is NodeClass.VARIABLE

    def test_sensor_ticker_stays_in_range(self):
        model = build_production_line_model(seed=3)
        tick = model.make_ticker()
        lo, hi = model.temperature_range
        for _ in range(200):
            tick()
        for nid in model.temperature_sensor_ids:
            assert lo <= model.space.read_value(nid).value <= hi

    def test_seeded_model_deterministic(self):
        a = build_production_line_model(seed=11)
        b = build_production_line_model(seed=11)
        for ident in (10, 11, 12):
            assert a.space.read_value(NodeId(2, ident)) == \
                b.space.read_value(NodeId(2, ident))


class TestServerBehavior:
    def test_two_concurrent_sessions_consistent(self, opcua_sim):
        url = url_for(opcua_sim)
        s1 = establish_session(url)
        s2 = establish_session(url)
        try:
            v1 = read_node(s1, NodeId(2, 20))
            v2 = read_node(s2, NodeId(2, 20))
            assert v1 == v2
        finally:
            close_session(s1)
            close_session(s2)

    def test_handle_transferable_between_threads(self, opcua_sim):
        handle = establish_session(url_for(opcua_sim))
        values = []
        errors = []

        def reader():
            try:
                values.append(read_node(handle, NodeId(2, 22)).value)
            except Exception as e:  # pragma: no cover
                errors.append(e)

        threads = [threading.Thread(target=reader) for _ in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        close_session(handle)
        assert not errors
        assert len(set(values)) == 1

    def test_bind_failure(self, opcua_sim):
        with pytest.raises(BindFailure):
            serve_opcua(("127.0.0.1", opcua_sim.port), build_production_line_model())

    def test_five_mode_pass(self, opcua_sim):
        """The full client workflow against one server instance."""
        url = url_for(opcua_sim)
        endpoints = get_endpoints(url)
        assert endpoints[0].security_policy == "None"
        session = establish_session(url)
        try:
            tree = browse_nodes(session, depth=3)
            assert tree.root.children[0].browse_name == "Factory"
            profiles = enumerate_variables(session, 2)
            assert len(profiles) >= 8
            write_node(session, NodeId(2, 20), VariantValue.int32(1500))
            assert read_node(session, NodeId(2, 20)).value == 1500
        finally:
            close_session(session)

    def test_browse_from_explicit_root(self, session):
        tree = browse_nodes(session, root=NodeId(2, 2), depth=1)
        assert {c.browse_name for c in tree.root.children} == \
            {"TemperatureSensors", "Motors"}

    def test_objects_root_constant(self):
        assert OBJECTS_NODE == NodeId(0, 85)
