"""Workflow engine: decide whether to ask the user, call a backend function, or finish.

The fixed strategy asks mandatory items no pending function can supply, then greedily
invokes the function filling the most open fields, then asks whatever remains.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping

from .configuration import (
    ApplicationFeatureModel,
    OpenItem,
    SELECTED,
    ELIMINATED,
    SetValue,
    open_items,
    specialize,
)
from .feature_model import Diagnostic, FeatureModel, Value

log = logging.getLogger(__name__)


class WorkflowError(Exception):
    pass


class CatalogError(WorkflowError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics) or "invalid catalog")
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class DataFunction:
    name: str
    inputs: tuple[str, ...]  # node paths whose values must be known first
    provides: tuple[str, ...]  # node paths this function can fill


@dataclass(frozen=True)
class FunctionCatalog:
    service_name: str
    functions: tuple[DataFunction, ...] = ()

    def get(self, name: str) -> DataFunction:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(name)

    def names(self) -> frozenset[str]:
        return frozenset(fn.name for fn in self.functions)


EMPTY_CATALOG = FunctionCatalog(service_name="", functions=())


@dataclass(frozen=True)
class AskUser:
    items: tuple[OpenItem, ...]


@dataclass(frozen=True)
class CallFunction:
    name: str


@dataclass(frozen=True)
class Finish:
    pass


WorkflowStep = object  # AskUser | CallFunction | Finish


# ---------------------------------------------------------------------------
# Catalog loading


def parse_function_catalog(text: str) -> FunctionCatalog:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError([Diagnostic("", "catalog-json", f"not valid JSON: {exc}")]) from exc
    functions = tuple(
        DataFunction(
            name=entry["name"],
            inputs=tuple(entry.get("inputs", ())),
            provides=tuple(entry.get("provides", ())),
        )
        for entry in data.get("functions", ())
    )
    return FunctionCatalog(service_name=data.get("service", ""), functions=functions)


def validate_catalog(catalog: FunctionCatalog, family: FeatureModel) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    seen: set[str] = set()
    for fn in catalog.functions:
        if fn.name in seen:
            diags.append(Diagnostic(fn.name, "duplicate-function", "function name occurs twice"))
        seen.add(fn.name)
        overlap = set(fn.inputs) & set(fn.provides)
        if overlap:
            diags.append(Diagnostic(fn.name, "input-provides-overlap",
                                    f"paths both required and provided: {', '.join(sorted(overlap))}"))
        for path in (*fn.inputs, *fn.provides):
            if not family.has_path(path):
                diags.append(Diagnostic(path, "unknown-path", f"{fn.name}: path not in family model"))
                continue
            node = family.node_at(path)
            if node.attribute is None:
                diags.append(Diagnostic(path, "path-without-attribute",
                                        f"{fn.name}: path carries no attribute value"))
            if _under_cloneable(family, path):
                diags.append(Diagnostic(path, "path-under-cloneable",
                                        f"{fn.name}: backend functions cannot address clone instances"))
    return diags


def load_function_catalog(text: str, family: FeatureModel | None = None) -> FunctionCatalog:
    catalog = parse_function_catalog(text)
    if family is not None:
        diags = validate_catalog(catalog, family)
        if diags:
            raise CatalogError(diags)
    return catalog


def _under_cloneable(family: FeatureModel, node_path: str) -> bool:
    from .feature_model import SolitaryFeature

    segments = node_path.split(".")
    for i in range(1, len(segments) + 1):
        node = family.node_at(".".join(segments[:i]))
        if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones:
            return True
    return False


# ---------------------------------------------------------------------------
# Strategy


def yield_of(app: ApplicationFeatureModel, fn: DataFunction, history: Iterable[str]) -> int:
    """How many open fields invoking `fn` now would fill; 0 if spent or not yet invocable."""
    if fn.name in set(history):
        return 0
    if any(path not in app.values for path in fn.inputs):
        return 0
    open_values = {i.path for i in open_items(app) if i.kind == "value"}
    return len(set(fn.provides) & open_values)


def plan_next(app: ApplicationFeatureModel, catalog: FunctionCatalog,
              history: Iterable[str]) -> WorkflowStep:
    """Fixed strategy: mandatory items nothing can supply, then the best function, then the rest."""
    history = set(history)
    items = open_items(app)
    if not items:
        return Finish()

    pending = [fn for fn in catalog.functions
               if fn.name not in history
               and not any(app.state_of(p) == ELIMINATED for p in fn.inputs)]
    obtainable = {path for fn in pending for path in fn.provides}

    mandatory = [i for i in items if i.tag in ("mandatory", "group")]
    unobtainable = tuple(i for i in mandatory if not (i.kind == "value" and i.path in obtainable))
    if unobtainable:
        return AskUser(unobtainable)

    invocable = [(fn, yield_of(app, fn, history)) for fn in pending]
    invocable = [(fn, y) for fn, y in invocable if y >= 1]
    if invocable:
        best = min(invocable, key=lambda pair: (-pair[1], pair[0].name))
        return CallFunction(best[0].name)

    if mandatory:
        # every remaining mandatory field is nominally obtainable, but no function can
        # run (unsatisfiable input chains); fall back to asking so sessions terminate
        return AskUser(tuple(mandatory))

    optional = tuple(i for i in items if i.tag == "optional")
    if optional:
        return AskUser(optional)
    return Finish()  # pragma: no cover - empty item kinds are exhaustive


def apply_function_result(app: ApplicationFeatureModel, fn: DataFunction,
                          result: Mapping[str, Value]) -> ApplicationFeatureModel:
    """Store returned values on selected, unset fields; anything else is skipped with a notice."""
    unexpected = set(result) - set(fn.provides)
    if unexpected:
        raise WorkflowError(f"{fn.name} returned paths outside its contract: {', '.join(sorted(unexpected))}")
    current = app
    for path in fn.provides:
        if path not in result:
            continue
        state = current.state_of(path)
        if state == ELIMINATED:
            log.info("discarding %s from %s: feature was eliminated", path, fn.name)
            continue
        if state != SELECTED:
            log.info("discarding %s from %s: feature is still undecided", path, fn.name)
            continue
        if path in current.values:
            log.info("discarding %s from %s: value already set", path, fn.name)
            continue
        current = specialize(current, SetValue(path, result[path]))
    return current
