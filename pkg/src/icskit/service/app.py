"""FastAPI application: one route family per tool module, the evidence
inbox, and the reporting pipeline."""

from __future__ import annotations

import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

import icskit
from icskit import ops
from icskit.evidence.report import (
    AuthFailure,
    EndpointUnreachable,
    LlmConfig,
    MalformedCompletion,
    ReportRequest,
    run_report_pipeline,
)
from icskit.evidence.store import EvidenceStore
from icskit.service.config import ServiceConfig

_REPORT_ID_RE = re.compile(r"^[0-9a-f]{8,64}$")


class ScanBody(BaseModel):
    hosts: str
    ports: str
    timeout_ms: int = Field(default=500, ge=1)
    concurrency: int = Field(default=256, ge=1)
    retries: int = Field(default=0, ge=0)
    classify: bool = True
    store_evidence: bool = False
    idempotency_key: Optional[str] = None


class ModbusCommon(BaseModel):
    host: str
    port: int = Field(default=502, ge=1, le=65535)
    unit_id: int = Field(default=1, ge=0, le=255)
    timeout_ms: int = Field(default=1000, ge=1)
    retries: int = Field(default=1, ge=0)
    store_evidence: bool = False
    idempotency_key: Optional[str] = None


DataTypeName = Literal["coil", "discrete_input", "holding_register", "input_register"]


class ModbusReadBody(ModbusCommon):
    type: DataTypeName = "holding_register"
    address: int = Field(ge=0, le=65535)
    count: int = Field(default=1, ge=1)


class ModbusWriteBody(ModbusCommon):
    type: DataTypeName = "holding_register"
    address: int = Field(ge=0, le=65535)
    values: list[int | bool]
    read_back: bool = False


class ModbusEnumerateBody(ModbusCommon):
    type: DataTypeName = "holding_register"
    start: int = Field(ge=0, le=65535)
    end: int = Field(ge=0, le=65535)


class ModbusScanUnitsBody(ModbusCommon):
    start: int = Field(default=1, ge=0, le=255)
    end: int = Field(default=254, ge=0, le=255)
    concurrency: int = Field(default=16, ge=1)


class ModbusScanRangeBody(ModbusEnumerateBody):
    chunk_size: int = Field(default=1000, ge=1)


class OpcUaAuth(BaseModel):
    username: str
    password: str = ""


class OpcUaCommon(BaseModel):
    endpoint_url: str
    auth: Optional[OpcUaAuth] = None
    store_evidence: bool = False
    idempotency_key: Optional[str] = None


class OpcUaBrowseBody(OpcUaCommon):
    root: Optional[str] = None
    depth: int = Field(default=5, ge=1)
    max_nodes: int = Field(default=500, ge=1)


class OpcUaEnumerateBody(OpcUaCommon):
    namespace_index: int = Field(ge=0, le=65535)


class OpcUaReadBody(OpcUaCommon):
    node_id: str


class VariantBody(BaseModel):
    type: Literal["BOOLEAN", "INT32", "DOUBLE", "STRING", "TIMESTAMP"]
    value: bool | int | float | str


class OpcUaWriteBody(OpcUaCommon):
    node_id: str
    value: VariantBody
    read_back: bool = False


class ReportBody(BaseModel):
    audience: Literal["executive", "technical"]
    title: str = "ICS/OT Security Assessment"
    model: str = "gpt-4o-mini"
    max_items: int = Field(default=200, ge=1)


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig.load()
    app = FastAPI(title="icskit", version=icskit.__version__)
    store = EvidenceStore(config.evidence_path)
    scan_pool = ThreadPoolExecutor(max_workers=4)
    idempotency: dict[str, str] = {}
    idempotency_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(p) for p in err.get("loc", [])[1:]),
             "message": err.get("msg", "invalid")}
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=400,
            content={"status": "error",
                     "error": {"type": "ValidationError", "details": details}},
        )

    def run_tool(category: str, action: str, params: dict, store_evidence: bool,
                 idempotency_key: str | None = None) -> JSONResponse:
        started = time.monotonic()
        if idempotency_key and store_evidence:
            with idempotency_lock:
                existing = idempotency.get(idempotency_key)
            if existing is not None:
                item = store.get(existing)
                if item is not None:
                    return JSONResponse(
                        {
                            "status": "ok" if (isinstance(item.output, dict)
                                               and item.output.get("ok")) else "error",
                            "result": item.output,
                            "output_text": "replayed from evidence "
                                           f"item {existing}",
                            "evidence_id": existing,
                            "elapsed_ms": 0.0,
                        }
                    )
        outcome = ops.execute_tool(category, action, params,
                                   evidence_store=store, store_evidence=store_evidence)
        if outcome.evidence_id and idempotency_key:
            with idempotency_lock:
                idempotency[idempotency_key] = outcome.evidence_id
        elapsed_ms = round((time.monotonic() - started) * 1000, 3)
        body = {
            "status": "ok" if outcome.ok else "error",
            "result": outcome.output,
            "output_text": ops.summarize_output(outcome),
            "evidence_id": outcome.evidence_id,
            "elapsed_ms": elapsed_ms,
        }
        if outcome.error_kind == "validation":
            # The schema should have rejected this before dispatch.
            logging.getLogger(__name__).warning(
                "validation-schema gap: %s/%s raised %s past the request schema",
                category, action, outcome.output.get("error", {}).get("type"),
            )
            return JSONResponse(status_code=400, content=body)
        if outcome.error_kind == "unreachable":
            return JSONResponse(status_code=502, content=body)
        return JSONResponse(body)

    # -- health ---------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "version": icskit.__version__,
            "llm_mode": config.llm.mode,
        }

    # -- scan -----------------------------------------------------------------

    @app.post("/api/scan")
    def scan(body: ScanBody):
        params = body.model_dump(exclude={"store_evidence", "idempotency_key"})
        future = scan_pool.submit(
            run_tool, "scan", "scan", params, body.store_evidence, body.idempotency_key
        )
        try:
            return future.result(timeout=config.scan_cap_s)
        except FutureTimeout:
            return JSONResponse(
                status_code=504,
                content={
                    "status": "error",
                    "error": {
                        "type": "ScanTimeout",
                        "message": f"scan exceeded the {config.scan_cap_s:.0f}s cap",
                    },
                },
            )

    # -- modbus -----------------------------------------------------------------

    def modbus_route(action: str, body: ModbusCommon) -> JSONResponse:
        params = body.model_dump(exclude={"store_evidence", "idempotency_key"})
        return run_tool("modbus", action, params, body.store_evidence,
                        body.idempotency_key)

    @app.post("/api/modbus/read")
    def modbus_read(body: ModbusReadBody):
        return modbus_route("read", body)

    @app.post("/api/modbus/write")
    def modbus_write(body: ModbusWriteBody):
        return modbus_route("write", body)

    @app.post("/api/modbus/enumerate")
    def modbus_enumerate(body: ModbusEnumerateBody):
        return modbus_route("enumerate", body)

    @app.post("/api/modbus/scan-units")
    def modbus_scan_units(body: ModbusScanUnitsBody):
        return modbus_route("scan_units", body)

    @app.post("/api/modbus/scan-range")
    def modbus_scan_range(body: ModbusScanRangeBody):
        return modbus_route("scan_range", body)

    # -- opcua -----------------------------------------------------------------

    def opcua_route(action: str, body: OpcUaCommon) -> JSONResponse:
        params = body.model_dump(exclude={"store_evidence", "idempotency_key"})
        if params.get("auth") is None:
            params.pop("auth", None)
        return run_tool("opcua", action, params, body.store_evidence,
                        body.idempotency_key)

    @app.post("/api/opcua/endpoints")
    def opcua_endpoints(body: OpcUaCommon):
        return opcua_route("endpoints", body)

    @app.post("/api/opcua/browse")
    def opcua_browse(body: OpcUaBrowseBody):
        return opcua_route("browse", body)

    @app.post("/api/opcua/enumerate")
    def opcua_enumerate(body: OpcUaEnumerateBody):
        return opcua_route("enumerate", body)

    @app.post("/api/opcua/read")
    def opcua_read(body: OpcUaReadBody):
        return opcua_route("read", body)

    @app.post("/api/opcua/write")
    def opcua_write(body: OpcUaWriteBody):
        return opcua_route("write", body)

    # -- inbox -----------------------------------------------------------------

    @app.get("/api/inbox")
    def inbox_list(category: Optional[str] = None):
        items = store.items(category=category)
        return {
            "status": "ok",
            "count": len(items),
            "items": [item.to_dict() for item in items],
        }

    @app.delete("/api/inbox")
    def inbox_clear():
        store.clear()
        return {"status": "ok", "cleared": True}

    # -- reporting ---------------------------------------------------------------

    @app.post("/api/report")
    def report(body: ReportBody):
        request = ReportRequest(
            audience=body.audience,
            title=body.title,
            model=body.model,
            max_items=body.max_items,
        )
        try:
            generated = run_report_pipeline(
                store, request, llm=config.llm, reports_dir=config.reports_dir
            )
        except (EndpointUnreachable, MalformedCompletion) as e:
            return JSONResponse(
                status_code=502,
                content={"status": "error", "retryable": True,
                         "error": {"type": type(e).__name__, "message": str(e)}},
            )
        except AuthFailure as e:
            return JSONResponse(
                status_code=502,
                content={"status": "error", "retryable": False,
                         "error": {"type": type(e).__name__, "message": str(e)}},
            )
        return {
            "status": "ok",
            "report_id": generated.report_id,
            "audience": generated.audience,
            "title": generated.title,
            "markdown": generated.markdown,
        }

    @app.get("/api/report/{report_id}/download")
    def report_download(report_id: str):
        if not _REPORT_ID_RE.match(report_id):
            return JSONResponse(
                status_code=400,
                content={"status": "error",
                         "error": {"type": "ValidationError",
                                   "message": "malformed report id"}},
            )
        path = Path(config.reports_dir) / f"{report_id}.md"
        if not path.exists():
            return JSONResponse(
                status_code=404,
                content={"status": "error",
                         "error": {"type": "NotFound",
                                   "message": f"no report {report_id}"}},
            )
        return FileResponse(path, media_type="text/markdown",
                            filename=f"{report_id}.md")

    # -- static UI ---------------------------------------------------------------

    static_dir = config.static_dir
    if static_dir is None:
        bundled = Path(__file__).resolve().parents[3] / "frontend" / "dist"
        static_dir = bundled if bundled.is_dir() else None
    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    app.state.config = config
    app.state.evidence_store = store
    return app


def main() -> None:  # pragma: no cover - thin uvicorn runner
    import uvicorn

    config = ServiceConfig.load()
    uvicorn.run(create_app(config), host=config.host, port=config.port)


if __name__ == "__main__":  # pragma: no cover
    main()
