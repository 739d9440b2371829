"""Bundled protocol simulators used as evaluation testbeds."""

from icskit.simulators.modbus_sim import (
    DeviceProfile,
    ModbusSimulator,
    ProfileStore,
    ScaledRegisterRule,
    SpanInit,
    build_default_testbed,
    build_water_plant_profile,
    handle_request,
    load_profiles,
    serve_modbus,
    water_plant_ticker,
)

__all__ = [
    "DeviceProfile",
    "ModbusSimulator",
    "ProfileStore",
    "ScaledRegisterRule",
    "SpanInit",
    "build_default_testbed",
    "build_water_plant_profile",
    "handle_request",
    "load_profiles",
    "serve_modbus",
    "water_plant_ticker",
]
