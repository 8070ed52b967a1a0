"""Session engine running the three generators: offline, initial-interaction, runtime-interaction.

Offline asks for everything; initial prefills what one backend call can supply; runtime
interleaves pages with backend calls planned by the workflow strategy, one page per ask.
"""

from __future__ import annotations

import datetime
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol

from .configuration import (
    ApplicationFeatureModel,
    OpenItem,
    is_complete,
    new_configuration,
    open_items,
    specialize,
)
from .cui_model import OutputWidget, Page, Report, WebApplication, page_to_wire_dict, widget_from_wire
from .data_admin import DataAdminClient, DataAdminError
from .feature_model import FeatureModel, Value, node_path_of, value_to_text, value_to_wire
from .transform import (
    DEFAULT_CLONE_BOUND,
    AnswerValidationError,
    TransformationTrace,
    cui_to_fm,
    fm_to_cui,
    fm_to_report,
)
from .workflow import AskUser, CallFunction, Finish, FunctionCatalog, plan_next, apply_function_result, yield_of

log = logging.getLogger(__name__)

OFFLINE = "offline"
INITIAL = "initial-interaction"
RUNTIME = "runtime-interaction"
MODES = (OFFLINE, INITIAL, RUNTIME)

_MODE_ALIASES = {"offline": OFFLINE, "initial": INITIAL, "runtime": RUNTIME,
                 INITIAL: INITIAL, RUNTIME: RUNTIME}

COLLECTING = "collecting"
COMPLETE = "complete"
REPORTED = "reported"


def normalize_mode(raw: str) -> str:
    mode = _MODE_ALIASES.get(raw)
    if mode is None:
        raise ValueError(f"unknown generator mode {raw!r}")
    return mode


class SessionError(Exception):
    pass


class UnknownServiceError(SessionError):
    def __init__(self, name: str):
        super().__init__(f"unknown service {name!r}")
        self.name = name


class SessionPhaseError(SessionError):
    pass


class PrematureReportError(SessionError):
    def __init__(self, open_paths: list[str]):
        super().__init__(f"session is not complete; open items: {', '.join(open_paths)}")
        self.open_paths = open_paths


@dataclass(frozen=True)
class ServiceDefinition:
    name: str
    family: FeatureModel
    catalog: FunctionCatalog
    title: str = ""

    def display_title(self) -> str:
        return self.title or self.family.root.description or self.name


class InteractionSource(Protocol):
    """User-answer channel consulted while a form is completed."""

    def answers_for(self, page: Page) -> Mapping[str, str]:
        ...


@dataclass
class ScriptedInteractionSource:
    """Replays a fixed name->answer map; names absent from the map stay unchecked."""

    answers_by_name: Mapping[str, str]
    citizen_id: str = ""

    @classmethod
    def from_json(cls, path: str | Path) -> "ScriptedInteractionSource":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(answers_by_name=data.get("answersByName", {}),
                   citizen_id=data.get("citizenId", ""))

    def answers_for(self, page: Page) -> dict[str, str]:
        return {w.name: self.answers_by_name[w.name]
                for w in page.input_widgets() if w.name in self.answers_by_name}


@dataclass
class Session:
    id: str
    service: ServiceDefinition
    citizen_id: str
    mode: str
    app: ApplicationFeatureModel
    clone_bound: int = DEFAULT_CLONE_BOUND
    data_admin: DataAdminClient | None = None
    phase: str = COLLECTING
    history: list[tuple[Page, dict[str, str]]] = field(default_factory=list)
    invoked: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)
    prefills: dict[str, str] = field(default_factory=dict)
    function_results: list[tuple[str, dict[str, Value]]] = field(default_factory=list)
    pending_scope: tuple[OpenItem, ...] | None = None
    page_traces: list[tuple[str, TransformationTrace]] = field(default_factory=list)
    submit_traces: list[tuple[str, TransformationTrace]] = field(default_factory=list)
    _pending_page: Page | None = None
    _report: Report | None = None


# ---------------------------------------------------------------------------
# One-shot generators


def generate_offline(family: FeatureModel, *, clone_bound: int = DEFAULT_CLONE_BOUND) -> WebApplication:
    """The complete e-form for a fresh configuration, no backend interaction at all."""
    app = new_configuration(family)
    page, app, _trace = _build_page(app, open_items(app), page_id="page-001", clone_bound=clone_bound)
    return WebApplication(service_name=family.name, pages=(page,))


def generate_initial(family: FeatureModel, citizen_id: str, data_admin: DataAdminClient | None,
                     catalog: FunctionCatalog, *, clone_bound: int = DEFAULT_CLONE_BOUND) -> WebApplication:
    """Like offline, after one backend call whose results appear as widget prefills."""
    app = new_configuration(family)
    prefills, _invoked, warnings = _initial_prefills(app, catalog, data_admin, citizen_id)
    for warning in warnings:
        log.warning("%s: %s", family.name, warning)
    page, app, _trace = _build_page(app, open_items(app), page_id="page-001",
                                    prefills=prefills, clone_bound=clone_bound)
    return WebApplication(service_name=family.name, pages=(page,))


def _initial_prefills(app: ApplicationFeatureModel, catalog: FunctionCatalog,
                      data_admin: DataAdminClient | None, citizen_id: str,
                      ) -> tuple[dict[str, str], str | None, list[str]]:
    candidates = [(fn, yield_of(app, fn, ())) for fn in catalog.functions]
    candidates = [(fn, y) for fn, y in candidates if y >= 1]
    if not candidates:
        return {}, None, []
    fn = min(candidates, key=lambda pair: (-pair[1], pair[0].name))[0]
    if data_admin is None:
        return {}, None, ["data administration is not configured; no fields prefilled"]
    try:
        result = data_admin.invoke(fn.name, citizen_id, {p: app.values[p] for p in fn.inputs})
    except DataAdminError as exc:
        return {}, fn.name, [f"data administration call {fn.name} failed: {exc}"]
    open_values = {i.path for i in open_items(app) if i.kind == "value"}
    prefills = {path: value_to_text(value) for path, value in result.items() if path in open_values}
    return prefills, fn.name, []


def _build_page(app: ApplicationFeatureModel, scope: list[OpenItem] | tuple[OpenItem, ...], *,
                page_id: str, prefills: Mapping[str, str] | None = None,
                clone_bound: int = DEFAULT_CLONE_BOUND,
                leading_notices: list[str] | None = None,
                ) -> tuple[Page, ApplicationFeatureModel, TransformationTrace]:
    """Emit a page, applying any forced decisions the rules report until none remain.

    Items a forced decision reveals are deferred to the next page; each retry only
    keeps surviving scope items, so the loop is bounded by the scope size.
    """
    current = app
    scope = list(scope)
    entries: tuple = ()
    while True:
        page, trace = fm_to_cui(current, scope, page_id=page_id, prefills=prefills,
                                clone_bound=clone_bound)
        entries = entries + trace.entries
        forced = trace.forced_decisions()
        if not forced:
            break
        for decision in forced:
            current = specialize(current, decision)
        keys = {(i.path, i.kind) for i in scope}
        scope = [i for i in open_items(current) if (i.path, i.kind) in keys]
    if leading_notices:
        outputs = tuple(OutputWidget(text=t) for t in leading_notices)
        page = Page(id=page.id, title=page.title, widgets=outputs + page.widgets)
    return page, current, TransformationTrace(trace.direction, entries)


# ---------------------------------------------------------------------------
# Sessions


def session_start(service_name: str, citizen_id: str, mode: str, data_admin: DataAdminClient | None,
                  services: Mapping[str, ServiceDefinition], *, session_id: str = "",
                  clone_bound: int = DEFAULT_CLONE_BOUND) -> Session:
    mode = normalize_mode(mode)
    if service_name not in services:
        raise UnknownServiceError(service_name)
    service = services[service_name]
    session = Session(
        id=session_id or service_name,
        service=service,
        citizen_id=citizen_id,
        mode=mode,
        app=new_configuration(service.family),
        clone_bound=clone_bound,
        data_admin=data_admin,
    )
    if mode == INITIAL:
        prefills, invoked, warnings = _initial_prefills(session.app, service.catalog, data_admin, citizen_id)
        session.prefills = prefills
        session.warnings.extend(warnings)
        if invoked is not None:
            session.invoked.append(invoked)
    if mode == RUNTIME:
        _advance(session)
    elif is_complete(session.app):
        session.phase = COMPLETE
    return session


def _advance(session: Session) -> None:
    """Runtime mode: invoke backend functions until the strategy asks the user or finishes."""
    catalog = session.service.catalog
    while True:
        step = plan_next(session.app, catalog, session.invoked)
        if isinstance(step, CallFunction):
            fn = catalog.get(step.name)
            session.invoked.append(fn.name)
            try:
                if session.data_admin is None:
                    raise DataAdminError("data administration is not configured")
                inputs = {p: session.app.values[p] for p in fn.inputs}
                result = session.data_admin.invoke(fn.name, session.citizen_id, inputs)
                result = {p: v for p, v in result.items() if p in fn.provides}
            except DataAdminError as exc:
                session.warnings.append(f"data administration call {fn.name} failed: {exc}")
                continue
            before = set(session.app.values)
            session.app = apply_function_result(session.app, fn, result)
            session.function_results.append((fn.name, dict(result)))
            for path in fn.provides:
                if path in session.app.values and path not in before:
                    node = session.app.family.node_at(node_path_of(path))
                    session.notices.append(
                        f"{node.description or node.name}: {value_to_text(session.app.values[path])}")
            continue
        if isinstance(step, AskUser):
            session.pending_scope = step.items
            return
        assert isinstance(step, Finish)
        session.phase = COMPLETE
        return


def session_page(session: Session) -> Page:
    """The current page; stable until answers are submitted."""
    if session.phase != COLLECTING:
        raise SessionPhaseError(f"session is {session.phase}; no page to show")
    if session._pending_page is not None:
        return session._pending_page
    if session.mode == RUNTIME:
        scope = list(session.pending_scope or ())
    else:
        scope = open_items(session.app)
    page, session.app, trace = _build_page(
        session.app, scope,
        page_id=f"page-{len(session.history) + 1:03d}",
        prefills=session.prefills if session.mode == INITIAL else None,
        clone_bound=session.clone_bound,
        leading_notices=session.notices if session.mode == RUNTIME else None,
    )
    session.page_traces.append((page.id, trace))
    session._pending_page = page
    return page


def session_submit(session: Session, answers: Mapping[str, str]) -> Session:
    """Apply one page of answers; raises AnswerValidationError leaving the session unchanged."""
    if session.phase != COLLECTING:
        raise SessionPhaseError(f"session is {session.phase}; answers not accepted")
    page = session_page(session)
    new_app, trace = cui_to_fm(session.app, page, answers)
    session.submit_traces.append((page.id, trace))
    session.app = new_app
    session.history.append((page, dict(answers)))
    session._pending_page = None
    session.notices = []
    session.pending_scope = None
    if session.mode == RUNTIME:
        _advance(session)
    elif is_complete(session.app):
        session.phase = COMPLETE
    return session


def session_report(session: Session) -> Report:
    if session.phase == COLLECTING:
        raise PrematureReportError([i.path for i in open_items(session.app)])
    if session._report is None:
        session._report = fm_to_report(session.app, session.citizen_id)
    session.phase = REPORTED
    return session._report


def run_to_completion(session: Session, source: InteractionSource, *,
                      max_cycles: int | None = None) -> Session:
    """Drive a session with a scripted source until it completes."""
    if max_cycles is None:
        max_cycles = termination_bound(session)
    for _ in range(max_cycles):
        if session.phase != COLLECTING:
            return session
        page = session_page(session)
        answers = source.answers_for(page)
        session_submit(session, answers)
    if session.phase == COLLECTING:
        raise SessionError(f"session did not terminate within {max_cycles} cycles")
    return session


def termination_bound(session: Session) -> int:
    """Submit/plan cycles any session needs at most; linear in instances and functions."""
    instances = session.service.family.node_count() * max(2, session.clone_bound)
    return 2 * instances + len(session.service.catalog.functions) + 4


# ---------------------------------------------------------------------------
# Snapshots


def _value_from_wire(family: FeatureModel, path: str, raw: object) -> Value:
    node = family.node_at(node_path_of(path))
    value_type = node.attribute.value_type
    if value_type == "date" and isinstance(raw, str):
        return datetime.date.fromisoformat(raw)
    if value_type == "float" and isinstance(raw, int) and not isinstance(raw, bool):
        return float(raw)
    return raw  # type: ignore[return-value]


def _page_from_dict(data: dict) -> Page:
    return Page(id=data["pageId"], title=data["title"],
                widgets=tuple(widget_from_wire(w) for w in data["widgets"]))


def session_to_dict(session: Session) -> dict:
    return {
        "id": session.id,
        "service": session.service.name,
        "citizenId": session.citizen_id,
        "mode": session.mode,
        "phase": session.phase,
        "cloneBound": session.clone_bound,
        "invoked": list(session.invoked),
        "warnings": list(session.warnings),
        "notices": list(session.notices),
        "prefills": dict(session.prefills),
        "pendingScope": [vars(i) for i in session.pending_scope] if session.pending_scope is not None else None,
        "history": [{"page": page_to_wire_dict(p), "answers": a} for p, a in session.history],
        "functionResults": [
            {"name": name, "values": {p: value_to_wire(v) for p, v in values.items()}}
            for name, values in session.function_results
        ],
        "app": {
            "states": dict(session.app.states),
            "clones": dict(session.app.clones),
            "values": {p: value_to_wire(v) for p, v in session.app.values.items()},
        },
    }


def session_from_dict(data: dict, services: Mapping[str, ServiceDefinition],
                      data_admin: DataAdminClient | None) -> Session:
    service = services[data["service"]]
    family = service.family
    app = ApplicationFeatureModel(
        family=family,
        states=dict(data["app"]["states"]),
        clones=dict(data["app"]["clones"]),
        values={p: _value_from_wire(family, p, raw) for p, raw in data["app"]["values"].items()},
    )
    session = Session(
        id=data["id"],
        service=service,
        citizen_id=data["citizenId"],
        mode=data["mode"],
        app=app,
        clone_bound=data.get("cloneBound", DEFAULT_CLONE_BOUND),
        data_admin=data_admin,
        phase=data["phase"],
    )
    session.invoked = list(data.get("invoked", ()))
    session.warnings = list(data.get("warnings", ()))
    session.notices = list(data.get("notices", ()))
    session.prefills = dict(data.get("prefills", {}))
    raw_scope = data.get("pendingScope")
    session.pending_scope = tuple(OpenItem(**i) for i in raw_scope) if raw_scope is not None else None
    session.history = [(_page_from_dict(h["page"]), dict(h["answers"])) for h in data.get("history", ())]
    session.function_results = [
        (entry["name"], {p: _value_from_wire(family, p, raw) for p, raw in entry["values"].items()})
        for entry in data.get("functionResults", ())
    ]
    return session
