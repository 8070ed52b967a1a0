"""Staged specialization of a family feature model into an application feature model.

State is kept sparse: a path has an entry iff its parent is selected (the root always
has one). Everything below an eliminated or undecided node is implicitly unreachable,
which keeps structural equality between independently produced configurations exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping
from xml.sax.saxutils import quoteattr

from .feature_model import (
    AnyNode,
    FeatureGroup,
    FeatureModel,
    GroupedFeature,
    SolitaryFeature,
    Value,
    indexed,
    node_path_of,
    parent_path,
    value_matches_type,
    value_to_text,
    _PROPERTIES_BY_TYPE,
)

UNDECIDED = "undecided"
SELECTED = "selected"
ELIMINATED = "eliminated"

DecisionState = str


class ConfigurationError(Exception):
    """Base class for specialization failures."""


class InvalidDecisionError(ConfigurationError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class CloneBoundsError(InvalidDecisionError):
    pass


class ValueTypeMismatchError(InvalidDecisionError):
    pass


class DecisionConflictError(ConfigurationError):
    """A decision (or its propagation) contradicts an earlier decision or a constraint."""

    def __init__(self, decision_path: str, conflict_path: str, message: str):
        super().__init__(f"{decision_path} conflicts with {conflict_path}: {message}")
        self.decision_path = decision_path
        self.conflict_path = conflict_path


# ---------------------------------------------------------------------------
# Decisions


@dataclass(frozen=True)
class Select:
    path: str


@dataclass(frozen=True)
class Eliminate:
    path: str


@dataclass(frozen=True)
class SetValue:
    path: str
    value: Value


@dataclass(frozen=True)
class ResolveGroup:
    path: str
    chosen: tuple[str, ...]


@dataclass(frozen=True)
class Clone:
    path: str
    count: int


Decision = object  # Select | Eliminate | SetValue | ResolveGroup | Clone


@dataclass(frozen=True)
class ApplicationFeatureModel:
    family: FeatureModel
    states: Mapping[str, DecisionState]
    clones: Mapping[str, int]
    values: Mapping[str, Value]

    def state_of(self, instance_path: str) -> DecisionState:
        """Effective state; paths under an eliminated ancestor count as eliminated."""
        if instance_path in self.states:
            return self.states[instance_path]
        parent = parent_path(instance_path)
        while parent is not None:
            state = self.states.get(parent)
            if state == ELIMINATED:
                return ELIMINATED
            if state is not None:
                return UNDECIDED
            parent = parent_path(parent)
        return UNDECIDED

    def selected_paths(self) -> frozenset[str]:
        return frozenset(p for p, s in self.states.items() if s == SELECTED)

    def structure_key(self) -> tuple:
        return (tuple(sorted(self.states.items())), tuple(sorted(self.clones.items())))


@dataclass(frozen=True)
class Violation:
    rule: str
    paths: tuple[str, ...]
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.message} ({', '.join(self.paths)})"


@dataclass(frozen=True)
class OpenItem:
    """An undecided variability point or unset attribute, in document order."""

    path: str
    node_path: str
    kind: str  # "value" | "optional" | "group" | "clone"
    tag: str  # "mandatory" | "optional" | "group"


# ---------------------------------------------------------------------------
# Propagation engine


class _Workspace:
    """Mutable copy of an application model plus eager propagation rules."""

    def __init__(self, app: ApplicationFeatureModel, decision_path: str):
        self.family = app.family
        self.states = dict(app.states)
        self.clones = dict(app.clones)
        self.values = dict(app.values)
        self.decision_path = decision_path
        self._requires_from: dict[str, list[str]] = {}
        self._excludes_from: dict[str, list[str]] = {}
        self._requires_to: dict[str, list[str]] = {}
        self._excludes_to: dict[str, list[str]] = {}
        for c in app.family.constraints:
            if c.kind == "requires":
                self._requires_from.setdefault(c.source, []).append(c.target)
                self._requires_to.setdefault(c.target, []).append(c.source)
            else:
                self._excludes_from.setdefault(c.source, []).append(c.target)
                self._excludes_to.setdefault(c.target, []).append(c.source)

    def freeze(self) -> ApplicationFeatureModel:
        return ApplicationFeatureModel(
            family=self.family, states=self.states, clones=self.clones, values=self.values
        )

    def node_at(self, instance_path: str) -> AnyNode:
        return self.family.node_at(node_path_of(instance_path))

    # -- forced state changes ------------------------------------------------

    def select(self, ip: str) -> None:
        state = self.states.get(ip)
        if state == SELECTED:
            return
        if state == ELIMINATED:
            raise DecisionConflictError(self.decision_path, ip, "cannot select an eliminated feature")
        node = self.node_at(ip)
        if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones:
            raise InvalidDecisionError(ip, "cloneable features are decided by a clone count")
        if state is None:
            parent = parent_path(ip)
            if parent is None:
                self.states[ip] = UNDECIDED
            else:
                self.select(parent)
                if self.states.get(ip) == ELIMINATED:
                    raise DecisionConflictError(self.decision_path, ip, "cannot select an eliminated feature")
                if self.states.get(ip) == SELECTED:
                    return
        np = node_path_of(ip)
        for source in self._excludes_to.get(np, ()):
            if self.states.get(source) == SELECTED:
                raise DecisionConflictError(self.decision_path, ip, f"{source} excludes this feature")
        self.states[ip] = SELECTED
        if isinstance(node, FeatureGroup):
            self.expand_group(ip, node)
        else:
            self.expand_children(ip, node)
        self.fire_source_constraints(ip)
        if isinstance(node, GroupedFeature):
            self.check_group(parent_path(ip))

    def eliminate(self, ip: str) -> None:
        state = self.states.get(ip)
        if state == ELIMINATED:
            return
        if state == SELECTED:
            raise DecisionConflictError(self.decision_path, ip, "cannot eliminate a selected feature")
        if state is None:
            return  # unreachable path; entry creation applies constraints later
        np = node_path_of(ip)
        for source in self._requires_to.get(np, ()):
            if self.states.get(source) == SELECTED:
                raise DecisionConflictError(self.decision_path, ip, f"{source} requires this feature")
        self.states[ip] = ELIMINATED
        node = self.node_at(ip)
        if isinstance(node, GroupedFeature):
            self.check_group(parent_path(ip))

    def clone(self, ip: str, count: int) -> None:
        node = self.node_at(ip)
        card = node.cardinality
        if count < card.min or (card.max is not None and count > card.max):
            raise CloneBoundsError(ip, f"clone count {count} outside cardinality {card}")
        if count == 0:
            self.states[ip] = ELIMINATED
            return
        self.states[ip] = SELECTED
        self.clones[ip] = count
        for i in range(1, count + 1):
            instance = indexed(ip, i)
            self.states[instance] = SELECTED
            self.expand_children(instance, node)

    # -- expansion and closure -----------------------------------------------

    def expand_group(self, ip: str, group: FeatureGroup) -> None:
        member_paths = [f"{ip}.{m.name}" for m in group.children]
        for mpath in member_paths:
            self.states.setdefault(mpath, UNDECIDED)
        for mpath in member_paths:
            self.apply_entry_closure(mpath)
        self.check_group(ip)

    def expand_children(self, ip: str, node: AnyNode) -> None:
        for child in node.children:
            cpath = f"{ip}.{child.name}"
            if cpath in self.states:
                continue
            if isinstance(child, FeatureGroup):
                self.select(cpath)
            elif isinstance(child, SolitaryFeature):
                card = child.cardinality
                if card.allows_clones:
                    self.states[cpath] = UNDECIDED
                    if card.min == card.max:
                        self.clone(cpath, card.min)
                elif card.min >= 1:
                    self.select(cpath)
                else:
                    self.create_entry(cpath)
            else:  # pragma: no cover - grouped features are expanded via their group
                raise TypeError(f"unexpected child kind {type(child).__name__}")

    def create_entry(self, ip: str) -> None:
        """Create an undecided entry, honouring constraints already decided elsewhere."""
        self.states[ip] = UNDECIDED
        self.apply_entry_closure(ip)

    def apply_entry_closure(self, ip: str) -> None:
        if self.states.get(ip) != UNDECIDED:
            return
        np = node_path_of(ip)
        forced_selected = any(self.states.get(src) == SELECTED for src in self._requires_to.get(np, ()))
        forced_eliminated = any(self.states.get(src) == SELECTED for src in self._excludes_to.get(np, ()))
        if forced_selected and forced_eliminated:
            raise DecisionConflictError(self.decision_path, ip, "constraints force opposite states")
        if forced_selected:
            self.select(ip)
        elif forced_eliminated:
            self.eliminate(ip)

    def fire_source_constraints(self, ip: str) -> None:
        np = node_path_of(ip)
        for target in self._requires_from.get(np, ()):
            if self.states.get(target) == ELIMINATED:
                raise DecisionConflictError(self.decision_path, target, f"{np} requires an eliminated feature")
            self.select(target)
        for target in self._excludes_from.get(np, ()):
            if self.states.get(target) == SELECTED:
                raise DecisionConflictError(self.decision_path, target, f"{np} excludes a selected feature")
            self.eliminate(target)

    def check_group(self, group_ip: str | None) -> None:
        if group_ip is None:
            return
        group = self.node_at(group_ip)
        if not isinstance(group, FeatureGroup) or self.states.get(group_ip) != SELECTED:
            return
        g = group.group_cardinality
        member_paths = [f"{group_ip}.{m.name}" for m in group.children]
        selected = [p for p in member_paths if self.states.get(p) == SELECTED]
        undecided = [p for p in member_paths if self.states.get(p) == UNDECIDED]
        if len(selected) > g.max:
            raise DecisionConflictError(self.decision_path, group_ip,
                                        f"{len(selected)} members selected, group allows at most {g.max}")
        if len(selected) + len(undecided) < g.min:
            raise DecisionConflictError(self.decision_path, group_ip,
                                        f"group cannot reach its minimum of {g.min} members")
        if undecided and len(selected) == g.max:
            for p in undecided:
                self.eliminate(p)
        elif undecided and len(selected) + len(undecided) == g.min:
            for p in undecided:
                self.select(p)


# ---------------------------------------------------------------------------
# Operations


def new_configuration(family: FeatureModel) -> ApplicationFeatureModel:
    """Fresh application model: root selected, mandatory chains propagated, all else undecided."""
    ws = _Workspace(ApplicationFeatureModel(family, {}, {}, {}), family.name)
    ws.select(family.name)
    return ws.freeze()


def specialize(app: ApplicationFeatureModel, decision: Decision) -> ApplicationFeatureModel:
    """Apply one decision plus all forced propagation; returns a new model, the input unchanged."""
    ws = _Workspace(app, getattr(decision, "path", app.family.name))

    if isinstance(decision, Select):
        _require_state(app, decision.path, UNDECIDED)
        node = ws.node_at(decision.path)
        if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones:
            raise InvalidDecisionError(decision.path, "cloneable features are decided by a clone count")
        ws.select(decision.path)

    elif isinstance(decision, Eliminate):
        _require_state(app, decision.path, UNDECIDED)
        node = ws.node_at(decision.path)
        if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones:
            ws.clone(decision.path, 0)
        else:
            ws.eliminate(decision.path)

    elif isinstance(decision, Clone):
        _require_state(app, decision.path, UNDECIDED)
        node = ws.node_at(decision.path)
        if not (isinstance(node, SolitaryFeature) and node.cardinality.allows_clones):
            raise InvalidDecisionError(decision.path, "clone counts apply only to cloneable features")
        ws.clone(decision.path, decision.count)

    elif isinstance(decision, ResolveGroup):
        group = ws.node_at(decision.path)
        if not isinstance(group, FeatureGroup):
            raise InvalidDecisionError(decision.path, "not a feature group")
        if app.state_of(decision.path) != SELECTED:
            raise InvalidDecisionError(decision.path, "group is not active")
        member_paths = [f"{decision.path}.{m.name}" for m in group.children]
        for chosen in decision.chosen:
            if chosen not in member_paths:
                raise InvalidDecisionError(chosen, f"not a member of group {decision.path}")
        if not any(app.states.get(p) == UNDECIDED for p in member_paths):
            raise InvalidDecisionError(decision.path, "group is already resolved")
        # prior partial selections stay; resolving cannot retract them
        final = {p for p in member_paths if app.states.get(p) == SELECTED} | set(decision.chosen)
        g = group.group_cardinality
        if not (g.min <= len(final) <= g.max):
            raise InvalidDecisionError(decision.path,
                                       f"{len(final)} members chosen, group cardinality is {g}")
        for p in member_paths:
            if p in final:
                ws.select(p)
            else:
                ws.eliminate(p)

    elif isinstance(decision, SetValue):
        if app.state_of(decision.path) != SELECTED:
            raise InvalidDecisionError(decision.path, "values can only be set on selected features")
        node = ws.node_at(decision.path)
        if node.attribute is None:
            raise InvalidDecisionError(decision.path, "feature has no attribute")
        if decision.path in app.values:
            raise InvalidDecisionError(decision.path, "value already set")
        if not value_matches_type(node.attribute.value_type, decision.value):
            raise ValueTypeMismatchError(
                decision.path,
                f"value {decision.value!r} does not match type {node.attribute.value_type!r}")
        ws.values[decision.path] = decision.value

    else:
        raise InvalidDecisionError(str(decision), "unknown decision kind")

    return ws.freeze()


def _require_state(app: ApplicationFeatureModel, path: str, wanted: DecisionState) -> None:
    if path not in app.states:
        app.family.node_at(node_path_of(path))  # raises UnknownPathError for bad paths
        raise InvalidDecisionError(path, "feature is not reachable yet")
    actual = app.states[path]
    if actual != wanted:
        raise InvalidDecisionError(path, f"feature is already {actual}")


def _is_clone_base(ip: str, node: AnyNode) -> bool:
    """True for the un-indexed path of a cloneable feature (its value slots live on instances)."""
    return (isinstance(node, SolitaryFeature) and node.cardinality.allows_clones
            and not ip.split(".")[-1].endswith("]"))


def is_complete(app: ApplicationFeatureModel) -> bool:
    """True iff nothing is undecided, every selected attributed feature has a value, constraints hold."""
    if any(s == UNDECIDED for s in app.states.values()):
        return False
    for ip, node in iter_instances(app):
        if (app.states.get(ip) == SELECTED and node.attribute is not None
                and not isinstance(node, FeatureGroup) and not _is_clone_base(ip, node)
                and ip not in app.values):
            return False
    return not check_constraints(app)


def check_constraints(app: ApplicationFeatureModel) -> list[Violation]:
    """Definite breaches of cardinalities, group cardinalities, requires and excludes."""
    violations: list[Violation] = []
    family = app.family

    for ip, node in iter_instances(app):
        state = app.states.get(ip)
        if isinstance(node, FeatureGroup) and state == SELECTED:
            g = node.group_cardinality
            member_paths = [f"{ip}.{m.name}" for m in node.children]
            selected = [p for p in member_paths if app.states.get(p) == SELECTED]
            undecided = [p for p in member_paths if app.states.get(p) == UNDECIDED]
            if len(selected) > g.max:
                violations.append(Violation("group-cardinality", (ip,),
                                            f"{len(selected)} members selected, at most {g.max} allowed"))
            if not undecided and len(selected) < g.min:
                violations.append(Violation("group-cardinality", (ip,),
                                            f"{len(selected)} members selected, at least {g.min} required"))
        if isinstance(node, SolitaryFeature) and state == SELECTED:
            for child in node.children:
                if isinstance(child, SolitaryFeature) and not child.cardinality.allows_clones \
                        and child.cardinality.min >= 1 and app.states.get(f"{ip}.{child.name}") == ELIMINATED:
                    violations.append(Violation("feature-cardinality", (f"{ip}.{child.name}",),
                                                "mandatory feature eliminated under a selected parent"))
                if isinstance(child, SolitaryFeature) and child.cardinality.allows_clones:
                    cpath = f"{ip}.{child.name}"
                    cstate = app.states.get(cpath)
                    count = app.clones.get(cpath)
                    if cstate == ELIMINATED and child.cardinality.min > 0:
                        violations.append(Violation("feature-cardinality", (cpath,),
                                                    f"feature requires at least {child.cardinality.min} clones"))
                    if count is not None:
                        card = child.cardinality
                        if count < card.min or (card.max is not None and count > card.max):
                            violations.append(Violation("feature-cardinality", (cpath,),
                                                        f"clone count {count} outside cardinality {card}"))

    for c in family.constraints:
        src, tgt = app.state_of(c.source), app.state_of(c.target)
        if c.kind == "requires" and src == SELECTED and tgt == ELIMINATED:
            violations.append(Violation("requires", (c.source, c.target),
                                        f"{c.source} requires {c.target}"))
        if c.kind == "excludes" and src == SELECTED and tgt == SELECTED:
            violations.append(Violation("excludes", (c.source, c.target),
                                        f"{c.source} excludes {c.target}"))
    return violations


def iter_instances(app: ApplicationFeatureModel) -> Iterator[tuple[str, AnyNode]]:
    """Yield (instance path, family node) for every state entry, in document order."""

    def walk(ip: str, node: AnyNode) -> Iterator[tuple[str, AnyNode]]:
        if ip not in app.states:
            return
        yield ip, node
        if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones and "[" not in ip.split(".")[-1]:
            for i in range(1, app.clones.get(ip, 0) + 1):
                instance = indexed(ip, i)
                if instance in app.states:
                    yield instance, node
                    for child in node.children:
                        yield from walk(f"{instance}.{child.name}", child)
            return
        for child in node.children:
            yield from walk(f"{ip}.{child.name}", child)

    yield from walk(app.family.name, app.family.root)


def open_items(app: ApplicationFeatureModel) -> list[OpenItem]:
    """Document-ordered undecided variability points and unset attributes on selected features."""
    items: list[OpenItem] = []
    for ip, node in iter_instances(app):
        state = app.states.get(ip)
        np = node_path_of(ip)
        if state == UNDECIDED:
            if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones:
                tag = "mandatory" if node.cardinality.min >= 1 else "optional"
                items.append(OpenItem(ip, np, "clone", tag))
            elif isinstance(node, GroupedFeature):
                continue  # covered by the group's own item
            elif isinstance(node, SolitaryFeature):
                items.append(OpenItem(ip, np, "optional", "optional"))
        elif state == SELECTED:
            if isinstance(node, FeatureGroup):
                member_paths = [f"{ip}.{m.name}" for m in node.children]
                if any(app.states.get(p) == UNDECIDED for p in member_paths):
                    items.append(OpenItem(ip, np, "group", "group"))
            elif node.attribute is not None and ip not in app.values and not _is_clone_base(ip, node):
                items.append(OpenItem(ip, np, "value", "mandatory"))
    return items


def is_compatible(config: ApplicationFeatureModel, partial: ApplicationFeatureModel) -> bool:
    """Whether a completed structure configuration agrees with every decision in `partial`."""
    for p, s in partial.states.items():
        if s != UNDECIDED and config.states.get(p) != s:
            return False
    for p, c in partial.clones.items():
        if config.clones.get(p) != c:
            return False
    return True


def propagation_sweep(app: ApplicationFeatureModel) -> ApplicationFeatureModel:
    """Re-run every propagation rule; a fixpoint model comes back unchanged."""
    ws = _Workspace(app, app.family.name)
    for ip, node in list(iter_instances(app)):
        if ws.states.get(ip) == SELECTED:
            if isinstance(node, FeatureGroup):
                ws.expand_group(ip, node)
            elif not _is_clone_base(ip, node):
                ws.expand_children(ip, node)
            ws.fire_source_constraints(ip)
    return ws.freeze()


# ---------------------------------------------------------------------------
# Canonical XML for application models


def serialize_application_model(app: ApplicationFeatureModel) -> str:
    """Family XML extended with state attributes, clone indices, and stored values."""
    from .feature_model import FM_NS

    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    root_attrs = (f' xmlns:fm="{FM_NS}" fm:value={quoteattr(app.family.name)}'
                  f' state={quoteattr(app.states.get(app.family.name, UNDECIDED))}')
    body: list[str] = []
    _emit_app_body(app, app.family.name, app.family.root, body, 1)
    for c in app.family.constraints:
        body.append(f'  <fm:Constraint kind={quoteattr(c.kind)} from={quoteattr(c.source)} to={quoteattr(c.target)}/>')
    if body:
        lines.append(f"<fm:FeatureModel{root_attrs}>")
        lines.extend(body)
        lines.append("</fm:FeatureModel>")
    else:
        lines.append(f"<fm:FeatureModel{root_attrs}/>")
    return "\n".join(lines) + "\n"


def _emit_app_body(app: ApplicationFeatureModel, ip: str, node: AnyNode, lines: list[str], indent: int) -> None:
    pad = "  " * indent
    if node.description is not None:
        lines.append(f"{pad}<fm:Annotation>")
        lines.append(f"{pad}  <fm:Description fm:value={quoteattr(node.description)}/>")
        lines.append(f"{pad}</fm:Annotation>")
    if node.attribute is not None and not isinstance(node, FeatureGroup):
        elem, props, value_elem = _PROPERTIES_BY_TYPE[node.attribute.value_type]
        shown = app.values.get(ip, node.preset)
        lines.append(f"{pad}<fm:Attribute>")
        if shown is None:
            lines.append(f"{pad}  <fm:{elem}/>")
        else:
            lines.append(f"{pad}  <fm:{elem}>")
            lines.append(f"{pad}    <fm:{props}>")
            lines.append(f"{pad}      <fm:{value_elem} fm:value={quoteattr(value_to_text(shown))}/>")
            lines.append(f"{pad}    </fm:{props}>")
            lines.append(f"{pad}  </fm:{elem}>")
        lines.append(f"{pad}</fm:Attribute>")
    for child in node.children:
        _emit_app_child(app, f"{ip}.{child.name}", child, lines, indent)


def _emit_app_child(app: ApplicationFeatureModel, ip: str, node: AnyNode, lines: list[str], indent: int,
                    index: int | None = None) -> None:
    pad = "  " * indent
    state = app.states.get(ip, UNDECIDED)
    index_attr = f' index="{index}"' if index is not None else ""

    if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones and index is None:
        card = node.cardinality
        max_text = "*" if card.max is None else str(card.max)
        count = app.clones.get(ip)
        if count is None:
            lines.append(f'{pad}<fm:SolitaryFeature fm:value={quoteattr(node.name)} '
                         f'min="{card.min}" max="{max_text}" state={quoteattr(state)}/>')
            return
        for i in range(1, count + 1):
            _emit_app_child(app, indexed(ip, i), node, lines, indent, index=i)
        return

    if isinstance(node, SolitaryFeature):
        card = node.cardinality
        max_text = "*" if card.max is None else str(card.max)
        open_tag = (f"{pad}<fm:SolitaryFeature fm:value={quoteattr(node.name)} "
                    f'min="{card.min}" max="{max_text}"{index_attr} state={quoteattr(state)}')
        closer = "SolitaryFeature"
    elif isinstance(node, FeatureGroup):
        g = node.group_cardinality
        open_tag = (f"{pad}<fm:FeatureGroup fm:value={quoteattr(node.name)} "
                    f'gmin="{g.min}" gmax="{g.max}" state={quoteattr(state)}')
        closer = "FeatureGroup"
    else:
        open_tag = f"{pad}<fm:GroupedFeature fm:value={quoteattr(node.name)} state={quoteattr(state)}"
        closer = "GroupedFeature"

    body: list[str] = []
    if state != ELIMINATED:
        _emit_app_body(app, ip, node, body, indent + 1)
    if body:
        lines.append(open_tag + ">")
        lines.extend(body)
        lines.append(f"{pad}</fm:{closer}>")
    else:
        lines.append(open_tag + "/>")
