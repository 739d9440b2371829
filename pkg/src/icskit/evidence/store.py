"""Append-only evidence inbox backed by a line-delimited JSON file.

Each line is one immutable item: id, timestamp, category, the operation's
parameters, and its output. Appends are serialized through one writer
lock; reads observe a consistent prefix. Clearing is an explicit
whole-inbox operation.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

CATEGORIES = ("scan", "modbus", "opcua")


class StorageFailure(Exception):
    """Inbox file could not be read or written."""


@dataclass(frozen=True)
class EvidenceItem:
    item_id: str
    timestamp: str
    category: str
    params: dict
    output: object

    def to_dict(self) -> dict:
        return {
            "id": self.item_id,
            "t": self.timestamp,
            "category": self.category,
            "params": self.params,
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvidenceItem":
        return cls(
            item_id=doc["id"],
            timestamp=doc["t"],
            category=doc["category"],
            params=doc.get("params", {}),
            output=doc.get("output"),
        )


class EvidenceStore:
    """Durable inbox; safe for concurrent appenders within one process."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, category: str, params: dict, output: object) -> str:
        """Append one item and return its id."""
        if category not in CATEGORIES:
            raise ValueError(f"category must be one of {CATEGORIES}, got {category!r}")
        item = EvidenceItem(
            item_id="ev-" + uuid.uuid4().hex[:12],
            timestamp=datetime.now(timezone.utc).isoformat(),
            category=category,
            params=params,
            output=output,
        )
        line = json.dumps(item.to_dict(), sort_keys=True, default=str)
        with self._lock:
            try:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
            except OSError as e:
                raise StorageFailure(f"cannot append to {self.path}: {e}") from e
        return item.item_id

    def items(self, category: str | None = None) -> list[EvidenceItem]:
        """All items in append order, optionally filtered by category."""
        if not self.path.exists():
            return []
        out = []
        try:
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    item = EvidenceItem.from_dict(json.loads(line))
                    if category is None or item.category == category:
                        out.append(item)
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise StorageFailure(f"cannot read {self.path}: {e}") from e
        return out

    def get(self, item_id: str) -> EvidenceItem | None:
        for item in self.items():
            if item.item_id == item_id:
                return item
        return None

    def count(self) -> int:
        return len(self.items())

    def clear(self) -> None:
        """Remove every item; atomic whole-inbox truncation."""
        with self._lock:
            try:
                if self.path.exists():
                    self.path.unlink()
            except OSError as e:
                raise StorageFailure(f"cannot clear {self.path}: {e}") from e


def select_items(store: EvidenceStore, n: int) -> list[EvidenceItem]:
    """The at-most-n most recent items, oldest first."""
    if n < 1:
        raise ValueError("n must be positive")
    items = store.items()
    return items[-n:]
