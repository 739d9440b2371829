"""Service configuration from environment variables and an optional
JSON config file (file values are overridden by the environment)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from icskit.evidence.report import LlmConfig

ENV_BIND_HOST = "ICSKIT_BIND_HOST"
ENV_BIND_PORT = "ICSKIT_BIND_PORT"
ENV_EVIDENCE_PATH = "ICSKIT_EVIDENCE_PATH"
ENV_REPORTS_DIR = "ICSKIT_REPORTS_DIR"
ENV_STATIC_DIR = "ICSKIT_STATIC_DIR"
ENV_CONFIG_FILE = "ICSKIT_CONFIG"

DEFAULT_EVIDENCE_PATH = "icskit-data/evidence.jsonl"
DEFAULT_REPORTS_DIR = "icskit-data/reports"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8800
    evidence_path: Path = Path(DEFAULT_EVIDENCE_PATH)
    reports_dir: Path = Path(DEFAULT_REPORTS_DIR)
    static_dir: Path | None = None
    llm: LlmConfig = field(default_factory=LlmConfig)
    scan_cap_s: float = 120.0

    @classmethod
    def load(cls, config_file: str | Path | None = None) -> "ServiceConfig":
        """Resolve configuration: defaults < config file < environment."""
        values: dict = {}
        path = config_file or os.environ.get(ENV_CONFIG_FILE)
        if path:
            values.update(json.loads(Path(path).read_text(encoding="utf-8")))

        def pick(env: str, key: str, default):
            return os.environ.get(env) or values.get(key) or default

        llm_env = LlmConfig.from_env()
        llm = LlmConfig(
            base_url=llm_env.base_url or values.get("llm_base_url"),
            model=llm_env.model if llm_env.model != "gpt-4o-mini"
            else values.get("llm_model", llm_env.model),
            api_key=llm_env.api_key or values.get("llm_api_key"),
        )
        static = pick(ENV_STATIC_DIR, "static_dir", None)
        return cls(
            host=pick(ENV_BIND_HOST, "host", "127.0.0.1"),
            port=int(pick(ENV_BIND_PORT, "port", 8800)),
            evidence_path=Path(pick(ENV_EVIDENCE_PATH, "evidence_path",
                                    DEFAULT_EVIDENCE_PATH)),
            reports_dir=Path(pick(ENV_REPORTS_DIR, "reports_dir", DEFAULT_REPORTS_DIR)),
            static_dir=Path(static) if static else None,
            llm=llm,
            scan_cap_s=float(values.get("scan_cap_s", 120.0)),
        )
