"""Stateless HTTP JSON API over the model store and the compute engine.

Every computation endpoint is a pure function of its inputs: identical
requests produce byte-identical responses, and no session state exists on
the server.  The only shared mutable things are the on-disk user model
store (single writer per model id) and the per-model single-flight guard
that keeps concurrent frontier jobs from stacking up.

Bundled example models are read-only; user models live as documents in a
configurable directory.  All error bodies have the shape
``{"error": str, "details": [...]}``.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import ingest as ingest_mod
from .flow import flow_report
from .model import (
    GraphValidationError,
    PortfolioError,
    graph_from_document,
    load_graph,
    portfolio_from_document,
    validate_graph,
)
from .solver import (
    METHODS,
    SearchSpaceError,
    SolveOptions,
    optimize,
    pareto_frontier,
)

MODEL_ID_RE = re.compile(r"^[a-z0-9-]+$")


class ApiError(Exception):
    def __init__(self, status: int, error: str, details: list[str] | None = None):
        self.status = status
        self.error = error
        self.details = details or []
        super().__init__(error)


@dataclass
class ApiConfig:
    models_dir: Path | None = None
    default_workers: int | str = 1
    cors_origin: str | None = None
    ui_dir: Path | None = None

    @classmethod
    def from_env(cls) -> "ApiConfig":
        models = os.environ.get("SECPARETO_MODELS")
        workers: int | str = os.environ.get("SECPARETO_WORKERS", 1)
        if isinstance(workers, str) and workers != "auto":
            workers = int(workers)
        ui = os.environ.get("SECPARETO_UI")
        return cls(
            models_dir=Path(models) if models else None,
            default_workers=workers,
            cors_origin=os.environ.get("SECPARETO_CORS"),
            ui_dir=Path(ui) if ui else None,
        )


def bundled_models() -> dict[str, dict[str, Any]]:
    out = {}
    root = resources.files("secpareto").joinpath("data/models")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out[entry.name[: -len(".json")]] = json.loads(entry.read_text(encoding="utf-8"))
    return out


class ModelStore:
    """Bundled read-only models plus a directory of user documents."""

    def __init__(self, user_dir: Path | None):
        self.user_dir = user_dir
        self._bundled = bundled_models()

    def list_entries(self) -> list[dict[str, Any]]:
        entries = [
            {"model_id": mid, "name": doc.get("name", mid), "read_only": True}
            for mid, doc in self._bundled.items()
        ]
        if self.user_dir is not None and self.user_dir.exists():
            for path in sorted(self.user_dir.iterdir()):
                mid = path.name[: -len(".json")]
                if not path.name.endswith(".json") or not MODEL_ID_RE.match(mid):
                    continue
                if mid in self._bundled:
                    continue
                try:
                    doc = json.loads(path.read_text(encoding="utf-8"))
                    name = doc.get("name", mid)
                except (OSError, json.JSONDecodeError):
                    name = mid
                entries.append({"model_id": mid, "name": name, "read_only": False})
        return entries

    def is_read_only(self, model_id: str) -> bool:
        return model_id in self._bundled

    def get_document(self, model_id: str) -> dict[str, Any]:
        if model_id in self._bundled:
            return self._bundled[model_id]
        path = self._user_path(model_id)
        if path is None or not path.exists():
            raise ApiError(404, f'unknown model "{model_id}"')
        return json.loads(path.read_text(encoding="utf-8"))

    def get_graph(self, model_id: str):
        doc = self.get_document(model_id)
        report = validate_graph(doc)
        if not report.ok:
            raise ApiError(
                422,
                f'model "{model_id}" is not a valid attack graph',
                [i.message for i in report.errors],
            )
        return graph_from_document(doc)

    def put_document(self, model_id: str, doc: dict[str, Any]) -> None:
        path = self._user_path(model_id)
        if path is None:
            raise ApiError(500, "no model store directory configured")
        self.user_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    def _user_path(self, model_id: str) -> Path | None:
        if self.user_dir is None:
            return None
        return self.user_dir / f"{model_id}.json"


class SingleFlight:
    """At most one in-flight frontier job per model id."""

    def __init__(self) -> None:
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def acquire(self, key: str) -> threading.Lock:
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        if not lock.acquire(blocking=False):
            raise ApiError(503, f'a frontier job for model "{key}" is already running')
        return lock


def _json_response(payload: Any, status: int = 200) -> Response:
    return Response(
        content=json.dumps(payload, ensure_ascii=False),
        status_code=status,
        media_type="application/json",
    )


def _error_response(status: int, error: str, details: list[str] | None = None) -> Response:
    return _json_response({"error": error, "details": details or []}, status)


def _solve_options(payload: dict[str, Any], config: ApiConfig) -> SolveOptions:
    method = payload.get("method", "best_first")
    if method not in METHODS:
        raise ApiError(422, f'unknown method "{method}"', [f"choose one of {', '.join(METHODS)}"])
    workers = payload.get("workers", config.default_workers)
    if workers != "auto":
        try:
            workers = int(workers)
        except (TypeError, ValueError):
            raise ApiError(422, f"workers must be an integer or 'auto', got {workers!r}")
        if workers < 1:
            raise ApiError(422, "workers must be >= 1")
    time_limit = payload.get("time_limit")
    if time_limit is not None and (not isinstance(time_limit, (int, float)) or time_limit <= 0):
        raise ApiError(422, "time_limit must be a positive number of seconds")
    return SolveOptions(method=method, workers=workers, time_limit=time_limit)


def create_app(config: ApiConfig | None = None) -> FastAPI:
    config = config or ApiConfig.from_env()
    store = ModelStore(config.models_dir)
    flights = SingleFlight()
    app = FastAPI(title="secpareto", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.flights = flights
    app.state.config = config

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.error, exc.details)

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        return _error_response(422, "invalid request body", [str(e) for e in exc.errors()])

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        return _error_response(exc.status_code, str(exc.detail))

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception):
        return _error_response(500, f"{type(exc).__name__}: {exc}")

    @app.get("/api/models")
    def list_models() -> Response:
        return _json_response(store.list_entries())

    @app.get("/api/models/{model_id}")
    def get_model(model_id: str) -> Response:
        return _json_response(store.get_document(model_id))

    @app.put("/api/models/{model_id}")
    async def put_model(model_id: str, request: Request) -> Response:
        if not MODEL_ID_RE.match(model_id):
            raise ApiError(422, f'model id "{model_id}" must match [a-z0-9-]+')
        if store.is_read_only(model_id):
            raise ApiError(403, f'model "{model_id}" is bundled and read-only')
        body = await request.body()
        report = validate_graph(body)
        if not report.ok:
            return _json_response(report.to_json_dict(), 422)
        store.put_document(model_id, json.loads(body))
        return _json_response(report.to_json_dict())

    @app.post("/api/models/{model_id}/flows")
    async def flows(model_id: str, request: Request) -> Response:
        graph = store.get_graph(model_id)
        try:
            portfolio = portfolio_from_document(await request.json())
            report = flow_report(graph, portfolio)
        except json.JSONDecodeError as exc:
            raise ApiError(422, f"body is not valid JSON: {exc.msg}")
        except PortfolioError as exc:
            raise ApiError(422, "invalid portfolio", [str(exc)])
        return _json_response(report.to_json_dict())

    @app.post("/api/models/{model_id}/optimize")
    async def optimize_model(model_id: str, request: Request) -> Response:
        graph = store.get_graph(model_id)
        try:
            payload = await request.json()
        except json.JSONDecodeError as exc:
            raise ApiError(422, f"body is not valid JSON: {exc.msg}")
        budget = payload.get("budget")
        if not isinstance(budget, (int, float)) or isinstance(budget, bool) or budget < 0:
            raise ApiError(422, f"budget must be a number >= 0, got {budget!r}")
        result = optimize(graph, float(budget), _solve_options(payload, config))
        body = result.point.to_json_dict()
        body["proven"] = result.proven
        return _json_response(body)

    @app.post("/api/models/{model_id}/pareto")
    async def pareto_model(model_id: str, request: Request) -> Response:
        graph = store.get_graph(model_id)
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            payload = {}
        opts = _solve_options(payload, config)
        lock = flights.acquire(model_id)
        try:
            result = pareto_frontier(graph, opts)
        except SearchSpaceError as exc:
            raise ApiError(422, str(exc))
        finally:
            lock.release()
        return _json_response(
            {
                "points": [p.to_json_dict() for p in result.points],
                "proven": result.proven,
                "elapsed_ms": result.elapsed_ms,
            }
        )

    @app.post("/api/ingest")
    async def ingest(request: Request) -> Response:
        try:
            payload = await request.json()
        except json.JSONDecodeError as exc:
            raise ApiError(422, f"body is not valid JSON: {exc.msg}")
        bundle = payload.get("bundle")
        if bundle is None:
            raise ApiError(422, 'missing "bundle"')
        tactics = payload.get("tactics")
        if not isinstance(tactics, list) or not tactics:
            raise ApiError(422, "tactics must be a non-empty list of tactic names")
        try:
            records = ingest_mod.parse_bundle(bundle)
            table = ingest_mod.compute_risk(records, set(tactics))
        except ingest_mod.BundleParseError as exc:
            raise ApiError(422, "bundle parse error", [str(exc)])
        body: dict[str, Any] = {"risk_table": table.to_json_dict()}

        binding = payload.get("binding")
        model_id = payload.get("model_id")
        if binding is not None:
            if not isinstance(binding, dict):
                raise ApiError(422, "binding must be a map of edge id to technique id")
            if model_id is None:
                raise ApiError(422, "binding requires a model_id to rebind")
            graph = store.get_graph(model_id)
            try:
                rebound = ingest_mod.bind_risks(graph, table, binding)
            except ingest_mod.BindingError as exc:
                raise ApiError(422, "binding error", exc.failures)
            from .model import graph_to_document

            doc = graph_to_document(rebound)
            body["graph"] = doc
            persisted = False
            if not store.is_read_only(model_id):
                store.put_document(model_id, doc)
                persisted = True
            body["persisted"] = persisted
        return _json_response(body)

    if config.cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    if config.ui_dir is not None and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.ui_dir), html=True), name="ui")

    return app
