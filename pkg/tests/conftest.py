"""Shared fixtures: live simulators on ephemeral loopback ports."""

from __future__ import annotations

import pytest

from icskit.modbus.client import ConnectionParams
from icskit.opcua import AuthConfig, build_production_line_model, serve_opcua
from icskit.simulators import (
    build_default_testbed,
    build_water_plant_profile,
    serve_modbus,
    water_plant_ticker,
)

TESTBED_SEED = 42


@pytest.fixture
def testbed_sim():
    sim = serve_modbus(("127.0.0.1", 0), build_default_testbed(TESTBED_SEED),
                       seed=TESTBED_SEED)
    yield sim
    sim.stop()


@pytest.fixture
def water_sim():
    sim = serve_modbus(("127.0.0.1", 0), [build_water_plant_profile()],
                       ticker=water_plant_ticker())
    yield sim
    sim.stop()


@pytest.fixture
def opcua_sim():
    server = serve_opcua(("127.0.0.1", 0), build_production_line_model(seed=7))
    yield server
    server.stop()


@pytest.fixture
def opcua_user_sim():
    server = serve_opcua(
        ("127.0.0.1", 0),
        build_production_line_model(seed=7),
        AuthConfig(anonymous=False, users={"operator": "secret"}),
    )
    yield server
    server.stop()


def conn_for(sim, unit_id: int = 1, timeout_ms: int = 2000,
             retries: int = 1) -> ConnectionParams:
    return ConnectionParams(host="127.0.0.1", port=sim.port, unit_id=unit_id,
                            timeout_ms=timeout_ms, retries=retries)


def url_for(server) -> str:
    return f"opc.tcp://127.0.0.1:{server.port}/server/"
