"""Command line: validate, generate, simulate, enumerate, serve.

Exit codes: 0 success, 1 domain failure (diagnostics, conflicts, missing answers),
2 usage or I/O problems (bad arguments, unreadable files, malformed XML).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .configuration import ConfigurationError
from .cui_model import page_to_wire, render_html, render_report
from .data_admin import DataAdminError, FixtureDataAdmin, load_fixtures
from .feature_model import (
    EnumerationLimitError,
    FeatureModelError,
    ModelParseError,
    enumerate_configurations,
    parse_feature_model,
    validate_model,
    value_to_text,
)
from .interaction import (
    COLLECTING,
    INITIAL,
    OFFLINE,
    ScriptedInteractionSource,
    ServiceDefinition,
    Session,
    SessionError,
    normalize_mode,
    session_page,
    session_report,
    session_start,
    session_submit,
)
from .server import load_services
from .transform import AnswerValidationError, trace_to_dicts
from .workflow import CatalogError, EMPTY_CATALOG, load_function_catalog

TRACE_VERSION = 1
DEFAULT_PORT = 8080
PORT_ENV_VAR_NAME = "FORMWEAVE_PORT"

log = logging.getLogger(__name__)


def bundled_services_dir() -> Path:
    """Directory with the services shipped inside the package."""
    return Path(__file__).resolve().parent / "services"


def _read_file(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc}") from exc


class _UsageError(Exception):
    pass


def _load_model(path: str, services_dir: str | None):
    resolver = None
    if services_dir:
        services, _warnings = load_services(services_dir)
        resolver = {name: definition.family for name, definition in services.items()}
    return parse_feature_model(_read_file(path), resolver=resolver, validate=False)


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(args) -> int:
    try:
        model = _load_model(args.model, args.services_dir)
    except ModelParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    diagnostics = validate_model(model, core_types_only=args.core_types_only)
    for d in diagnostics:
        print(f"{d.path}: {d.rule}: {d.message}", file=sys.stderr)
    return 1 if diagnostics else 0


def cmd_generate(args) -> int:
    from .interaction import generate_initial, generate_offline

    mode = normalize_mode(args.mode)
    try:
        model = parse_feature_model(_read_file(args.model))
    except FeatureModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if mode == OFFLINE:
        web_app = generate_offline(model)
    elif mode == INITIAL:
        if not (args.citizen and args.fixtures and args.catalog):
            print("error: initial mode requires --citizen, --fixtures and --catalog", file=sys.stderr)
            return 2
        try:
            catalog = load_function_catalog(_read_file(args.catalog), model)
            store = load_fixtures(args.fixtures, [(model, catalog)], ignore_unknown=True)
        except (CatalogError, DataAdminError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        client = FixtureDataAdmin(store=store, contracts=[(model, catalog)])
        web_app = generate_initial(model, args.citizen, client, catalog)
    else:
        print("error: generate supports the offline and initial modes", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for index, page in enumerate(web_app.pages, start=1):
        (out_dir / f"page-{index:03d}.html").write_text(render_html(page), encoding="utf-8")
        (out_dir / f"page-{index:03d}.json").write_text(page_to_wire(page), encoding="utf-8")
    print(f"wrote {len(web_app.pages)} page(s) to {out_dir}")
    return 0


def cmd_simulate(args) -> int:
    try:
        model = parse_feature_model(_read_file(args.model))
        catalog = EMPTY_CATALOG
        if args.catalog:
            catalog = load_function_catalog(_read_file(args.catalog), model)
        client = None
        if args.fixtures:
            store = load_fixtures(args.fixtures, [(model, catalog)], ignore_unknown=True)
            client = FixtureDataAdmin(store=store, contracts=[(model, catalog)])
    except (FeatureModelError, CatalogError, DataAdminError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        source = ScriptedInteractionSource.from_json(args.answers)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load answers: {exc}", file=sys.stderr)
        return 2

    service = ServiceDefinition(name=model.name, family=model, catalog=catalog)
    session = session_start(model.name, source.citizen_id, args.mode, client, {model.name: service})
    trace: dict = {"traceVersion": TRACE_VERSION, "service": model.name, "mode": session.mode,
                   "pages": [], "ruleFirings": [], "functionCalls": []}
    try:
        _run_traced(session, source, trace)
    except AnswerValidationError as exc:
        for name, message in exc.errors:
            print(f"answer error: {name}: {message}", file=sys.stderr)
        return 1
    except (ConfigurationError, SessionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report = session_report(session)
    trace["functionCalls"] = [
        {"name": name, "values": {p: value_to_text(v) for p, v in values.items()}}
        for name, values in session.function_results
    ]
    Path(args.trace).write_text(json.dumps(trace, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(render_report(report, "text"))
    return 0


def _run_traced(session: Session, source: ScriptedInteractionSource, trace: dict) -> None:
    from .interaction import termination_bound

    for _ in range(termination_bound(session)):
        if session.phase != COLLECTING:
            break
        page = session_page(session)
        answers = source.answers_for(page)
        session_submit(session, answers)
        trace["pages"].append({
            "pageId": page.id,
            "widgets": [w.name for w in page.input_widgets()],
            "answers": answers,
        })
    if session.phase == COLLECTING:
        raise SessionError("session did not terminate")
    for page_id, page_trace in session.page_traces + session.submit_traces:
        trace["ruleFirings"].extend(
            {"page": page_id, **entry} for entry in trace_to_dicts(page_trace)
        )


def cmd_enumerate(args) -> int:
    try:
        model = parse_feature_model(_read_file(args.model))
    except FeatureModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        configurations = enumerate_configurations(model, args.bound)
    except EnumerationLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(len(configurations))
    for config in configurations:
        selected = [ip for ip, _node in _ordered_selected(config)]
        print(" ".join(selected))
    return 0


def _ordered_selected(config):
    from .configuration import SELECTED, iter_instances

    for ip, node in iter_instances(config):
        if config.states.get(ip) == SELECTED:
            yield ip, node


def cmd_serve(args) -> int:
    from .server import run_server

    services_dir = args.services_dir or str(bundled_services_dir())
    run_server(port=args.port, services_dir=services_dir, fixtures_file=args.fixtures,
               snapshot_file=args.snapshot_file, ui_dir=args.ui_dir)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formweave",
                                     description="Generate interactive e-forms from feature models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a family model against its invariants")
    p.add_argument("model")
    p.add_argument("--services-dir", help="directory used to resolve model references")
    p.add_argument("--core-types-only", action="store_true",
                   help="flag boolean/date attributes as extensions")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="emit the e-form pages for a model")
    p.add_argument("model")
    p.add_argument("--mode", choices=["offline", "initial"], default="offline")
    p.add_argument("--citizen", help="citizen id for the initial backend call")
    p.add_argument("--fixtures", help="fixture file backing the data administration")
    p.add_argument("--catalog", help="function catalog file")
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="drive a full session from a scripted answers file")
    p.add_argument("model")
    p.add_argument("--catalog")
    p.add_argument("--fixtures")
    p.add_argument("--answers", required=True, help="scripted interaction source (JSON)")
    p.add_argument("--mode", default="runtime", help="offline | initial | runtime")
    p.add_argument("--trace", default="trace.json", help="where to write the run trace")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("enumerate", help="list every legal structure configuration")
    p.add_argument("model")
    p.add_argument("--bound", type=int, default=2, help="clone count cap")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("serve", help="start the HTTP session service")
    p.add_argument("--port", type=int, default=int(os.environ.get(PORT_ENV_VAR_NAME, DEFAULT_PORT)))
    p.add_argument("--services-dir", help="directory of *.fm.xml (+ *.catalog.json) services")
    p.add_argument("--fixtures", help="fixture file backing the data administration")
    p.add_argument("--snapshot-file", help="persist sessions across restarts")
    p.add_argument("--ui-dir", help="static web client directory served under /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
