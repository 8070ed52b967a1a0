"""HTTP session service: service catalog, session lifecycle, reports, and the backend seam."""

from __future__ import annotations

import json
import logging
import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse, Response

from .configuration import ConfigurationError, open_items
from .cui_model import page_to_wire_dict, render_html, render_report
from .data_admin import (
    DataAdminClient,
    FixtureDataAdmin,
    FunctionUnavailableError,
    UnknownCitizenError,
    UnknownFunctionError,
    load_fixtures,
)
from .feature_model import (
    FeatureModelError,
    ModelParseError,
    parse_feature_model,
    value_to_wire,
)
from .interaction import (
    COLLECTING,
    RUNTIME,
    ServiceDefinition,
    Session,
    UnknownServiceError,
    normalize_mode,
    session_from_dict,
    session_page,
    session_report,
    session_start,
    session_submit,
    session_to_dict,
)
from .transform import AnswerValidationError, TransformError
from .workflow import CatalogError, EMPTY_CATALOG, FunctionCatalog, load_function_catalog

log = logging.getLogger(__name__)

DEFAULT_PORT = 8080
PORT_ENV_VAR = "FORMWEAVE_PORT"


@dataclass(frozen=True)
class ServiceCatalogEntry:
    service_name: str
    model_file: Path
    catalog_file: Path | None


class _DirectoryResolver:
    """Resolves model references against the other family models in a directory."""

    def __init__(self, texts: Mapping[str, str]):
        self._texts = dict(texts)
        self._cache: dict[str, object] = {}
        self._loading: set[str] = set()

    def __call__(self, name: str):
        if name in self._cache:
            return self._cache[name]
        if name not in self._texts:
            raise KeyError(name)
        if name in self._loading:
            raise ModelParseError(f"circular model reference involving {name!r}")
        self._loading.add(name)
        try:
            model = parse_feature_model(self._texts[name], resolver=self)
        finally:
            self._loading.discard(name)
        self._cache[name] = model
        return model


def load_services(directory: str | Path) -> tuple[dict[str, ServiceDefinition], list[str]]:
    """Load every *.fm.xml (+ sibling *.catalog.json) in a directory.

    Broken files are skipped with a warning so one corrupt model cannot take the
    listing down.
    """
    directory = Path(directory)
    warnings: list[str] = []
    entries: list[ServiceCatalogEntry] = []
    texts: dict[str, str] = {}
    for model_file in sorted(directory.glob("*.fm.xml")):
        try:
            text = model_file.read_text(encoding="utf-8")
            name = _peek_model_name(text)
        except (OSError, FeatureModelError) as exc:
            warnings.append(f"{model_file.name}: {exc}")
            continue
        if name in texts:
            warnings.append(f"{model_file.name}: duplicate service name {name!r}; file skipped")
            continue
        catalog_file = model_file.with_name(model_file.name.replace(".fm.xml", ".catalog.json"))
        entries.append(ServiceCatalogEntry(
            service_name=name, model_file=model_file,
            catalog_file=catalog_file if catalog_file.exists() else None))
        texts[name] = text
    resolver = _DirectoryResolver(texts)

    services: dict[str, ServiceDefinition] = {}
    for entry in entries:
        try:
            family = resolver(entry.service_name)
        except FeatureModelError as exc:
            warnings.append(f"{entry.model_file.name}: {exc}")
            continue
        catalog: FunctionCatalog = EMPTY_CATALOG
        if entry.catalog_file is not None:
            try:
                catalog = load_function_catalog(entry.catalog_file.read_text(encoding="utf-8"), family)
            except (OSError, CatalogError) as exc:
                warnings.append(f"{entry.catalog_file.name}: {exc}")
                continue
        services[entry.service_name] = ServiceDefinition(
            name=entry.service_name, family=family, catalog=catalog)
    for warning in warnings:
        log.warning("service directory: %s", warning)
    return services, warnings


def _peek_model_name(text: str) -> str:
    import xml.etree.ElementTree as ET

    from .feature_model import FM_NS

    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ModelParseError(f"malformed XML: {exc}") from exc
    name = root.get(f"{{{FM_NS}}}value")
    if root.tag != f"{{{FM_NS}}}FeatureModel" or not name:
        raise ModelParseError("not a feature model document")
    return name


class SessionStore:
    """In-memory sessions with per-session exclusive access and optional file snapshots."""

    def __init__(self, snapshot_file: str | Path | None = None):
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._mutex = threading.Lock()
        self.snapshot_file = Path(snapshot_file) if snapshot_file else None

    def create(self, session: Session) -> None:
        with self._mutex:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()

    def ids(self) -> list[str]:
        with self._mutex:
            return list(self._sessions)

    @contextmanager
    def exclusive(self, session_id: str):
        with self._mutex:
            if session_id not in self._sessions:
                raise KeyError(session_id)
            lock = self._locks[session_id]
        with lock:
            yield self._sessions[session_id]

    def snapshot(self, path: str | Path | None = None) -> None:
        target = Path(path) if path else self.snapshot_file
        if target is None:
            return
        with self._mutex:
            payload = {"version": 1, "sessions": [session_to_dict(s) for s in self._sessions.values()]}
        target.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    def restore(self, path: str | Path, services: Mapping[str, ServiceDefinition],
                data_admin: DataAdminClient | None) -> int:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        count = 0
        for entry in data.get("sessions", ()):
            try:
                session = session_from_dict(entry, services, data_admin)
            except KeyError as exc:
                log.warning("snapshot session %s references unknown service %s", entry.get("id"), exc)
                continue
            self.create(session)
            count += 1
        return count


def new_session_id() -> str:
    return secrets.token_hex(16)  # 128-bit, unguessable


# ---------------------------------------------------------------------------
# Application factory


def create_app(*, services_dir: str | Path | None = None,
               fixtures_file: str | Path | None = None,
               snapshot_file: str | Path | None = None,
               ui_dir: str | Path | None = None,
               services: Mapping[str, ServiceDefinition] | None = None,
               data_admin: DataAdminClient | None = None) -> FastAPI:
    if services is None:
        if services_dir is None:
            raise ValueError("either services or services_dir is required")
        services, _warnings = load_services(services_dir)
    services = dict(services)

    if data_admin is None and fixtures_file is not None:
        contracts = [(s.family, s.catalog) for s in services.values()]
        store = load_fixtures(fixtures_file, contracts)
        data_admin = FixtureDataAdmin(store=store, contracts=contracts)

    store = SessionStore(snapshot_file)

    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def _lifespan(_app):
        yield
        store.snapshot()

    app = FastAPI(title="formweave", version="0.1.0", lifespan=_lifespan)
    app.state.services = services
    app.state.data_admin = data_admin
    app.state.store = store
    if snapshot_file is not None and Path(snapshot_file).exists():
        restored = app.state.store.restore(snapshot_file, services, data_admin)
        log.info("restored %d session(s) from %s", restored, snapshot_file)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    def _snapshot() -> None:
        store.snapshot()

    @app.get("/services")
    def list_services():
        return [{"serviceName": s.name, "title": s.display_title()}
                for s in sorted(services.values(), key=lambda s: s.name)]

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        service_name = body.get("service", "")
        citizen_id = body.get("citizenId", "")
        raw_mode = body.get("mode", "")
        try:
            mode = normalize_mode(raw_mode)
        except ValueError:
            return JSONResponse({"error": f"unknown mode {raw_mode!r}"}, status_code=400)
        if mode == RUNTIME and app.state.data_admin is None:
            return JSONResponse({"error": "data administration is not configured"}, status_code=502)
        try:
            session = session_start(service_name, citizen_id, mode, app.state.data_admin, services,
                                    session_id=new_session_id())
        except UnknownServiceError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        store.create(session)
        _snapshot()
        return JSONResponse({"sessionId": session.id, "phase": session.phase,
                             "warnings": session.warnings}, status_code=201)

    @app.get("/sessions/{session_id}/page")
    def get_page(session_id: str, request: Request):
        try:
            with store.exclusive(session_id) as session:
                if session.phase != COLLECTING:
                    return {"phase": session.phase}
                page = session_page(session)
                if "text/html" in request.headers.get("accept", ""):
                    return HTMLResponse(render_html(page))
                return page_to_wire_dict(page)
        except KeyError:
            return JSONResponse({"error": "unknown session"}, status_code=404)

    @app.post("/sessions/{session_id}/answers")
    def post_answers(session_id: str, body: dict):
        answers = body.get("answers", {})
        try:
            with store.exclusive(session_id) as session:
                if session.phase != COLLECTING:
                    return JSONResponse({"error": f"session is {session.phase}"}, status_code=409)
                try:
                    session_submit(session, answers)
                except AnswerValidationError as exc:
                    return JSONResponse({
                        "errors": [{"widget": name, "message": message} for name, message in exc.errors],
                        "page": page_to_wire_dict(session_page(session)),
                    }, status_code=422)
                except (ConfigurationError, TransformError) as exc:
                    return JSONResponse({
                        "errors": [{"widget": getattr(exc, "path", None), "message": str(exc)}],
                        "page": page_to_wire_dict(session_page(session)),
                    }, status_code=422)
                _snapshot()
                if session.phase != COLLECTING:
                    return {"phase": session.phase}
                return page_to_wire_dict(session_page(session))
        except KeyError:
            return JSONResponse({"error": "unknown session"}, status_code=404)

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str, format: str = "xml"):
        if format not in ("xml", "text"):
            return JSONResponse({"error": f"unknown format {format!r}"}, status_code=400)
        try:
            with store.exclusive(session_id) as session:
                if session.phase == COLLECTING:
                    return JSONResponse(
                        {"error": "session is not complete",
                         "openItems": [i.path for i in open_items(session.app)]},
                        status_code=409)
                report = session_report(session)
                _snapshot()
                document = render_report(report, format)
                if format == "xml":
                    return Response(document, media_type="application/xml")
                return PlainTextResponse(document)
        except KeyError:
            return JSONResponse({"error": "unknown session"}, status_code=404)

    @app.post("/functions/{fn_name}")
    def invoke_function(fn_name: str, body: dict):
        client = app.state.data_admin
        if client is None:
            return JSONResponse({"error": "data administration is not configured"}, status_code=502)
        citizen_id = body.get("citizenId", "")
        inputs = body.get("inputs", {})
        try:
            values = client.invoke(fn_name, citizen_id, inputs)
        except UnknownFunctionError:
            return JSONResponse({"error": "unknown-function"}, status_code=404)
        except UnknownCitizenError:
            return JSONResponse({"error": "unknown-citizen"}, status_code=404)
        except FunctionUnavailableError:
            return JSONResponse({"error": "unavailable"}, status_code=503)
        return {"values": {path: value_to_wire(value) for path, value in values.items()}}

    return app


def run_server(*, port: int, services_dir: str | Path, fixtures_file: str | Path | None = None,
               snapshot_file: str | Path | None = None, ui_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(services_dir=services_dir, fixtures_file=fixtures_file,
                     snapshot_file=snapshot_file, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="info")
