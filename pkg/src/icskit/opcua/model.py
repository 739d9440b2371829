"""Server-side address space, the bundled production-line model, and the
declarative model-config loader."""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable

from icskit.opcua.types import (
    AccessLevel,
    NodeClass,
    NodeId,
    OBJECTS_NODE,
    VariantType,
    VariantValue,
)


@dataclass
class UaNode:
    node_id: NodeId
    browse_name: str
    node_class: NodeClass
    display_name: str = ""
    data_type: VariantType | None = None
    value: VariantValue | None = None
    access: AccessLevel = field(default_factory=AccessLevel)
    children: list[NodeId] = field(default_factory=list)
    # dynamic values (e.g. uptime) override the stored one on read
    value_fn: Callable[[], VariantValue] | None = None

    def __post_init__(self) -> None:
        if not self.display_name:
            self.display_name = self.browse_name


class AddressSpace:
    """Node store with atomic per-call read/write sections."""

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.nodes: dict[NodeId, UaNode] = {}
        objects = UaNode(OBJECTS_NODE, "Objects", NodeClass.OBJECT)
        self.nodes[OBJECTS_NODE] = objects

    def add(self, node: UaNode, parent: NodeId | None = OBJECTS_NODE) -> UaNode:
        with self.lock:
            if node.node_id in self.nodes:
                raise ValueError(f"duplicate node id {node.node_id}")
            self.nodes[node.node_id] = node
            if parent is not None:
                self.nodes[parent].children.append(node.node_id)
        return node

    def get(self, node_id: NodeId) -> UaNode | None:
        with self.lock:
            return self.nodes.get(node_id)

    def read_value(self, node_id: NodeId) -> VariantValue | None:
        with self.lock:
            node = self.nodes.get(node_id)
            if node is None:
                return None
            if node.value_fn is not None:
                return node.value_fn()
            return node.value

    def set_value(self, node_id: NodeId, value: VariantValue) -> None:
        with self.lock:
            self.nodes[node_id].value = value

    def variables(self) -> list[UaNode]:
        with self.lock:
            return [n for n in self.nodes.values() if n.node_class is NodeClass.VARIABLE]


@dataclass
class ProductionLineModel:
    """Bundled address space plus sensor dynamics configuration."""

    space: AddressSpace
    temperature_sensor_ids: list[NodeId]
    temperature_range: tuple[float, float]
    seed: int

    def make_ticker(self) -> Callable[[], None]:
        """Bounded random walk over the temperature sensors, one step per
        call; seeded for reproducibility."""
        rng = random.Random(self.seed)
        lo, hi = self.temperature_range

        def tick() -> None:
            for nid in self.temperature_sensor_ids:
                current = self.space.read_value(nid)
                base = float(current.value) if current else (lo + hi) / 2
                stepped = max(lo, min(hi, base + rng.uniform(-0.3, 0.3)))
                self.space.set_value(nid, VariantValue.double(stepped))

        return tick


def build_production_line_model(
    seed: int = 7,
    temperature_range: tuple[float, float] = (18.0, 28.0),
    sensors_writable: bool = True,
) -> ProductionLineModel:
    """Hierarchical factory model: Factory > ProductionLine1 > sensors/motors.

    Three Double temperature sensors (ns=2;i=10..12), two motors exposing
    Int32 speed (i=20, i=22) and Boolean status (i=21, i=23), and a
    read-only Double Uptime metric (i=30) that grows monotonically.
    """
    space = AddressSpace()
    rng = random.Random(seed)
    lo, hi = temperature_range

    factory = space.add(UaNode(NodeId(2, 1), "Factory", NodeClass.OBJECT))
    line = space.add(UaNode(NodeId(2, 2), "ProductionLine1", NodeClass.OBJECT),
                     parent=factory.node_id)
    sensors = space.add(UaNode(NodeId(2, 3), "TemperatureSensors", NodeClass.OBJECT),
                        parent=line.node_id)
    motors = space.add(UaNode(NodeId(2, 4), "Motors", NodeClass.OBJECT),
                       parent=line.node_id)

    sensor_ids = []
    for i, ident in enumerate((10, 11, 12), start=1):
        nid = NodeId(2, ident)
        sensor_ids.append(nid)
        space.add(
            UaNode(
                nid,
                f"Temperature{i}",
                NodeClass.VARIABLE,
                data_type=VariantType.DOUBLE,
                value=VariantValue.double(round(rng.uniform(lo, hi), 2)),
                access=AccessLevel(readable=True, writable=sensors_writable),
            ),
            parent=sensors.node_id,
        )

    for motor, (speed_id, status_id) in (("Motor1", (20, 21)), ("Motor2", (22, 23))):
        space.add(
            UaNode(
                NodeId(2, speed_id),
                f"{motor}Speed",
                NodeClass.VARIABLE,
                data_type=VariantType.INT32,
                value=VariantValue.int32(900 + 50 * (speed_id - 20)),
                access=AccessLevel(readable=True, writable=True),
            ),
            parent=motors.node_id,
        )
        space.add(
            UaNode(
                NodeId(2, status_id),
                f"{motor}Status",
                NodeClass.VARIABLE,
                data_type=VariantType.BOOLEAN,
                value=VariantValue.boolean(True),
                access=AccessLevel(readable=True, writable=True),
            ),
            parent=motors.node_id,
        )

    start = time.monotonic()
    space.add(
        UaNode(
            NodeId(2, 30),
            "Uptime",
            NodeClass.VARIABLE,
            data_type=VariantType.DOUBLE,
            value=VariantValue.double(0.0),
            value_fn=lambda: VariantValue.double(time.monotonic() - start),
            access=AccessLevel(readable=True, writable=False),
        ),
        parent=factory.node_id,
    )

    return ProductionLineModel(
        space=space,
        temperature_sensor_ids=sensor_ids,
        temperature_range=temperature_range,
        seed=seed,
    )


_NODE_CLASSES = {"object": NodeClass.OBJECT, "variable": NodeClass.VARIABLE,
                 "method": NodeClass.METHOD}


def _value_from_config(tag_name: str, raw) -> VariantValue:
    tag = VariantType[tag_name.upper()]
    if tag is VariantType.BOOLEAN:
        return VariantValue.boolean(bool(raw))
    if tag is VariantType.INT32:
        return VariantValue.int32(int(raw))
    if tag is VariantType.DOUBLE:
        return VariantValue.double(float(raw))
    if tag is VariantType.STRING:
        return VariantValue.string(str(raw))
    return VariantValue.timestamp(datetime.fromisoformat(str(raw)))


def load_model(path: str | Path) -> tuple[AddressSpace, dict]:
    """Build an address space from a declarative JSON model config.

    Schema: {"auth": {"anonymous": bool, "users": {name: password}},
    "nodes": [{"id": "ns=2;i=1", "browse_name": str, "class":
    "object|variable", "parent": "ns=0;i=85" (default Objects),
    "display_name": str, "data_type": "BOOLEAN|INT32|DOUBLE|STRING|
    TIMESTAMP", "value": ..., "readable": bool, "writable": bool}, ...]}

    Parents must be declared before their children. Returns the space and
    the raw auth section (empty dict when absent).
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    space = AddressSpace()
    for entry in doc.get("nodes", []):
        node_id = NodeId.parse(entry["id"])
        node_class = _NODE_CLASSES[str(entry.get("class", "object")).lower()]
        parent = NodeId.parse(entry["parent"]) if entry.get("parent") else OBJECTS_NODE
        data_type = None
        value = None
        if node_class is NodeClass.VARIABLE:
            tag_name = entry.get("data_type", "DOUBLE")
            data_type = VariantType[str(tag_name).upper()]
            value = _value_from_config(tag_name, entry.get("value", 0))
        space.add(
            UaNode(
                node_id=node_id,
                browse_name=entry.get("browse_name", str(node_id)),
                node_class=node_class,
                display_name=entry.get("display_name", ""),
                data_type=data_type,
                value=value,
                access=AccessLevel(
                    readable=bool(entry.get("readable", True)),
                    writable=bool(entry.get("writable", False)),
                ),
            ),
            parent=parent,
        )
    return space, doc.get("auth", {})
