"""Rule-based transformations: feature model -> page, answers -> decisions, model -> report.

Rules follow an IF <condition> THEN <action> shape and are evaluated first-match per
scope item; label rules are non-terminal so a described, attributed feature yields
both its label and its input. Rules beyond the core set carry extension=True.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Mapping

from .configuration import (
    ApplicationFeatureModel,
    Clone,
    DecisionConflictError,
    Eliminate,
    OpenItem,
    ResolveGroup,
    Select,
    SetValue,
    SELECTED,
    ELIMINATED,
    UNDECIDED,
    is_complete,
    open_items,
)
from .cui_model import InputWidget, NavigationWidget, OutputWidget, Page, Widget
from .feature_model import (
    AnyNode,
    CORE_VALUE_TYPES,
    FeatureGroup,
    SolitaryFeature,
    lexical_error,
    node_path_of,
    split_path,
    text_to_value,
    value_to_text,
)

DEFAULT_CLONE_BOUND = 3

FM_TO_CUI = "fm-to-cui"
CUI_TO_FM = "cui-to-fm"
FM_TO_REPORT = "fm-to-report"


class TransformError(Exception):
    pass


class RuleCoverageError(TransformError):
    """A scope item matched no rule; unreachable with the built-in rule set."""


class IncompleteModelError(TransformError):
    def __init__(self, items: list[OpenItem]):
        paths = ", ".join(i.path for i in items)
        super().__init__(f"model is not complete; open items: {paths}")
        self.items = items


class AnswerValidationError(TransformError):
    """Lexically or structurally bad answers; carries one (widget, message) pair each."""

    def __init__(self, errors: list[tuple[str, str]]):
        super().__init__("; ".join(f"{name}: {message}" for name, message in errors))
        self.errors = errors


@dataclass(frozen=True)
class TraceEntry:
    path: str
    rule_id: str
    emitted: str
    decision: object | None = None


@dataclass(frozen=True)
class TransformationTrace:
    direction: str
    entries: tuple[TraceEntry, ...]

    def forced_decisions(self) -> list[object]:
        return [e.decision for e in self.entries if e.decision is not None]


def trace_to_dicts(trace: TransformationTrace) -> list[dict]:
    return [{"path": e.path, "rule": e.rule_id, "emitted": e.emitted} for e in trace.entries]


# ---------------------------------------------------------------------------
# Widget naming


def widget_name(instance_path: str, *, concat: bool = False) -> str:
    """Form-control name for a node. The default dot-joined form is injective;
    concat=True reproduces the separator-less ancestor concatenation, which is not."""
    if not concat:
        return instance_path
    return "".join(name + (f"[{i}]" if i is not None else "") for name, i in split_path(instance_path))


# ---------------------------------------------------------------------------
# Rule machinery


@dataclass(frozen=True)
class TransformationRule:
    id: str
    direction: str
    summary: str
    condition: Callable
    action: Callable
    extension: bool = False
    terminal: bool = True


@dataclass(frozen=True)
class RuleSet:
    direction: str
    rules: tuple[TransformationRule, ...]

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise TransformError("rule ids must be unique within a rule set")
        for r in self.rules:
            if r.direction != self.direction:
                raise TransformError(f"rule {r.id} direction {r.direction!r} does not match set {self.direction!r}")


class _PageBuilder:
    def __init__(self, app: ApplicationFeatureModel, *, page_id: str, title: str,
                 prefills: Mapping[str, str], clone_bound: int, concat_names: bool):
        self.app = app
        self.page_id = page_id
        self.title = title
        self.prefills = prefills
        self.clone_bound = clone_bound
        self.concat_names = concat_names
        self.widgets: list[Widget] = []
        self.entries: list[TraceEntry] = []
        self.pending_label: str | None = None

    def name_for(self, path: str) -> str:
        return widget_name(path, concat=self.concat_names)

    def record(self, path: str, rule_id: str, emitted: str, decision: object | None = None) -> None:
        self.entries.append(TraceEntry(path, rule_id, emitted, decision))

    def emit(self, widget: Widget) -> None:
        self.widgets.append(widget)

    def take_label(self) -> str | None:
        label, self.pending_label = self.pending_label, None
        return label

    def prefill_for(self, item: OpenItem, node: AnyNode) -> str | None:
        if item.path in self.prefills:
            return self.prefills[item.path]
        if node.preset is not None:
            return value_to_text(node.preset)
        return None


def _member_option(member: AnyNode) -> tuple[str, str]:
    if isinstance(member.preset, str):
        return member.name, member.preset
    return member.name, member.description or member.name


def _group_room(app: ApplicationFeatureModel, item: OpenItem, group: FeatureGroup) -> tuple[list, int, int]:
    """Undecided members plus how many more may (room) and must (need) be selected."""
    member_paths = [(f"{item.path}.{m.name}", m) for m in group.children]
    selected = sum(1 for p, _ in member_paths if app.states.get(p) == SELECTED)
    undecided = [(p, m) for p, m in member_paths if app.states.get(p) == UNDECIDED]
    g = group.group_cardinality
    return undecided, g.max - selected, max(0, g.min - selected)


# -- fm-to-cui actions -------------------------------------------------------


def _act_page_skeleton(ctx: _PageBuilder, item, node) -> None:
    ctx.record(ctx.app.family.name, "TR1", f"page {ctx.page_id}")


def _act_label(ctx: _PageBuilder, item: OpenItem, node: AnyNode) -> None:
    ctx.pending_label = node.description
    ctx.record(item.path, "TR2", f"label {node.description!r}")


def _act_text_input(ctx: _PageBuilder, item: OpenItem, node: AnyNode, rule_id: str) -> None:
    widget = InputWidget(
        kind="text",
        name=ctx.name_for(item.path),
        path=item.path,
        label=ctx.take_label(),
        value_type=node.attribute.value_type,
        required=True,
        prefill=ctx.prefill_for(item, node),
    )
    ctx.emit(widget)
    ctx.record(item.path, rule_id, f"text input {widget.name}")


def _act_bool_input(ctx: _PageBuilder, item: OpenItem, node: AnyNode) -> None:
    widget = InputWidget(
        kind="radio",
        name=ctx.name_for(item.path),
        path=item.path,
        label=ctx.take_label(),
        value_type="boolean",
        required=True,
        prefill=ctx.prefill_for(item, node),
        options=(("true", "Yes"), ("false", "No")),
    )
    ctx.emit(widget)
    ctx.record(item.path, "TR9", f"boolean radio {widget.name}")


def _act_radio_group(ctx: _PageBuilder, item: OpenItem, node: FeatureGroup) -> None:
    undecided, _room, _need = _group_room(ctx.app, item, node)
    widget = InputWidget(
        kind="radio",
        name=ctx.name_for(item.path),
        path=item.path,
        label=node.description or node.name,
        required=True,
        options=tuple(_member_option(m) for _p, m in undecided),
    )
    ctx.emit(widget)
    ctx.record(item.path, "TR4", f"radio group {widget.name}")


def _act_skip_singleton(ctx: _PageBuilder, item: OpenItem, node: FeatureGroup) -> None:
    member = node.children[0]
    decision = ResolveGroup(item.path, (f"{item.path}.{member.name}",))
    ctx.record(item.path, "TR5", f"auto-resolved single-member group to {member.name}", decision)


def _act_optional_checkbox(ctx: _PageBuilder, item: OpenItem, node: AnyNode) -> None:
    widget = InputWidget(
        kind="checkbox",
        name=ctx.name_for(item.path),
        path=item.path,
        label=node.description or node.name,
        required=False,
        options=((node.name, node.description or node.name),),
    )
    ctx.emit(widget)
    ctx.record(item.path, "TR6", f"optional checkbox {widget.name}")


def _act_checkbox_group(ctx: _PageBuilder, item: OpenItem, node: FeatureGroup) -> None:
    undecided, room, need = _group_room(ctx.app, item, node)
    widget = InputWidget(
        kind="checkbox",
        name=ctx.name_for(item.path),
        path=item.path,
        label=node.description or node.name,
        required=need > 0,
        options=tuple(_member_option(m) for _p, m in undecided),
    )
    ctx.emit(widget)
    ctx.record(item.path, "TR7", f"checkbox group {widget.name}")


def _act_clone_select(ctx: _PageBuilder, item: OpenItem, node: SolitaryFeature) -> None:
    card = node.cardinality
    cap = ctx.clone_bound if card.max is None else min(card.max, ctx.clone_bound)
    cap = max(cap, card.min)
    widget = InputWidget(
        kind="select",
        name=ctx.name_for(item.path),
        path=item.path,
        label=node.description or node.name,
        required=True,
        options=tuple((str(c), str(c)) for c in range(card.min, cap + 1)),
    )
    ctx.emit(widget)
    ctx.record(item.path, "TR8", f"clone count select {widget.name}")


def _act_submit(ctx: _PageBuilder, item, node) -> None:
    ctx.emit(NavigationWidget(kind="submit"))
    ctx.record(ctx.app.family.name, "TR11", "submit")


def default_fm_to_cui_rules() -> RuleSet:
    rules = (
        TransformationRule("TR1", FM_TO_CUI, "page skeleton for the first element",
                           condition=lambda ctx, item, node: item is None,
                           action=_act_page_skeleton),
        TransformationRule("TR2", FM_TO_CUI, "label for a described feature",
                           condition=lambda ctx, item, node: item is not None and item.kind == "value"
                           and node.description is not None,
                           action=_act_label, terminal=False),
        TransformationRule("TR3", FM_TO_CUI, "text input for a string/integer/float attribute",
                           condition=lambda ctx, item, node: item is not None and item.kind == "value"
                           and node.attribute is not None and node.attribute.value_type in CORE_VALUE_TYPES,
                           action=lambda ctx, item, node: _act_text_input(ctx, item, node, "TR3")),
        TransformationRule("TR4", FM_TO_CUI, "radio choice for a group needing exactly one more member",
                           condition=_radio_condition,
                           action=_act_radio_group),
        TransformationRule("TR5", FM_TO_CUI, "skip single-member groups and force their resolution",
                           condition=lambda ctx, item, node: item is not None and item.kind == "group"
                           and len(node.children) == 1 and node.group_cardinality.min >= 1,
                           action=_act_skip_singleton, extension=True),
        TransformationRule("TR6", FM_TO_CUI, "checkbox for an undecided optional feature",
                           condition=lambda ctx, item, node: item is not None and item.kind == "optional",
                           action=_act_optional_checkbox, extension=True),
        TransformationRule("TR7", FM_TO_CUI, "checkbox set for a multi-selection group",
                           condition=lambda ctx, item, node: item is not None and item.kind == "group",
                           action=_act_checkbox_group, extension=True),
        TransformationRule("TR8", FM_TO_CUI, "clone count selector for a cloneable feature",
                           condition=lambda ctx, item, node: item is not None and item.kind == "clone",
                           action=_act_clone_select, extension=True),
        TransformationRule("TR9", FM_TO_CUI, "yes/no radio for a boolean attribute",
                           condition=lambda ctx, item, node: item is not None and item.kind == "value"
                           and node.attribute is not None and node.attribute.value_type == "boolean",
                           action=_act_bool_input, extension=True),
        TransformationRule("TR10", FM_TO_CUI, "text input (ISO form) for a date attribute",
                           condition=lambda ctx, item, node: item is not None and item.kind == "value"
                           and node.attribute is not None and node.attribute.value_type == "date",
                           action=lambda ctx, item, node: _act_text_input(ctx, item, node, "TR10"),
                           extension=True),
        TransformationRule("TR11", FM_TO_CUI, "trailing submit control",
                           condition=lambda ctx, item, node: item is None,
                           action=_act_submit, extension=True),
    )
    return RuleSet(FM_TO_CUI, rules)


def _radio_condition(ctx, item, node) -> bool:
    if item is None or item.kind != "group":
        return False
    undecided, room, need = _group_room(ctx.app, item, node)
    return len(undecided) >= 2 and room == 1 and need == 1


# ---------------------------------------------------------------------------
# T: feature model -> page


def fm_to_cui(app: ApplicationFeatureModel, scope: list[OpenItem], rules: RuleSet | None = None, *,
              page_id: str = "page-001", title: str | None = None,
              prefills: Mapping[str, str] | None = None,
              clone_bound: int = DEFAULT_CLONE_BOUND,
              concat_names: bool = False) -> tuple[Page, TransformationTrace]:
    """Emit one page for the scope items, firing the first matching terminal rule per item.

    Single-member groups produce no widget; their forced resolution travels on the
    trace for the caller to apply.
    """
    rules = rules or default_fm_to_cui_rules()
    if rules.direction != FM_TO_CUI:
        raise TransformError(f"rule set direction {rules.direction!r} cannot build pages")
    open_now = {(i.path, i.kind) for i in open_items(app)}
    for item in scope:
        if (item.path, item.kind) not in open_now:
            raise TransformError(f"scope item {item.path} ({item.kind}) is not open")

    root = app.family.root
    ctx = _PageBuilder(
        app,
        page_id=page_id,
        title=title if title is not None else (root.description or app.family.name),
        prefills=prefills or {},
        clone_bound=clone_bound,
        concat_names=concat_names,
    )

    startup = [r for r in rules.rules if r.condition(ctx, None, None)]
    for rule in startup[:1]:
        rule.action(ctx, None, None)

    seen_sections: set[str] = set()
    for item in scope:
        node = app.family.node_at(item.node_path)
        _emit_section_labels(ctx, item.path, seen_sections)

        fired_terminal = False
        for rule in rules.rules:
            if rule.condition(ctx, item, node):
                rule.action(ctx, item, node)
                if rule.terminal:
                    fired_terminal = True
                    break
        if not fired_terminal:
            raise RuleCoverageError(f"no rule covers item {item.path} ({item.kind})")

    for rule in startup[1:]:
        rule.action(ctx, None, None)

    page = Page(id=ctx.page_id, title=ctx.title, widgets=tuple(ctx.widgets))
    return page, TransformationTrace(FM_TO_CUI, tuple(ctx.entries))


def _emit_section_labels(ctx: _PageBuilder, item_path: str, seen: set[str]) -> None:
    """Label the described ancestors (and clone instances) an item sits under, once per page."""
    segments = split_path(item_path)
    for depth in range(2, len(segments)):  # skip the root (page title) and the item itself
        prefix = ".".join(name + (f"[{i}]" if i is not None else "") for name, i in segments[:depth])
        if prefix in seen:
            continue
        seen.add(prefix)
        name, index = segments[depth - 1]
        node = ctx.app.family.node_at(node_path_of(prefix))
        if node.description is None and index is None:
            continue
        text = node.description or name
        if index is not None:
            text = f"{text} {index}"
        ctx.emit(OutputWidget(text=text))
        ctx.record(prefix, "TR2", f"section label {text!r}")


# ---------------------------------------------------------------------------
# T: answers -> feature model


def cui_to_fm(app: ApplicationFeatureModel, page: Page, answers: Mapping[str, str],
              ) -> tuple[ApplicationFeatureModel, TransformationTrace]:
    """Turn submitted answers into decisions, applied in page widget order.

    All lexical/required problems are collected and raised together before any
    decision is applied, so a failed submission leaves the model untouched.
    """
    inputs = page.input_widgets()
    by_name = {w.name: w for w in inputs}
    errors: list[tuple[str, str]] = []

    for name in answers:
        if name not in by_name:
            errors.append((name, "unknown widget"))

    plans: list[tuple[InputWidget, str, object | None, str]] = []  # widget, rule, decision, note
    for widget in inputs:
        raw = answers.get(widget.name)
        plan = _plan_decision(app, widget, raw, errors)
        if plan is not None:
            plans.append(plan)

    if errors:
        raise AnswerValidationError(errors)

    entries: list[TraceEntry] = []
    current = app
    for widget, rule_id, decision, note in plans:
        if decision is None:
            entries.append(TraceEntry(widget.path, rule_id, note))
            continue
        applied, current = _apply_agreeing(current, widget, decision)
        entries.append(TraceEntry(widget.path, rule_id, note if applied else f"{note} (already satisfied)"))
    return current, TransformationTrace(CUI_TO_FM, tuple(entries))


def _plan_decision(app: ApplicationFeatureModel, widget: InputWidget, raw: str | None,
                   errors: list[tuple[str, str]]):
    node = app.family.node_at(node_path_of(widget.path))

    if widget.kind == "text":
        if raw is None or raw == "":
            errors.append((widget.name, "a value is required"))
            return None
        problem = lexical_error(widget.value_type, raw)
        if problem is not None:
            errors.append((widget.name, problem))
            return None
        value = text_to_value(widget.value_type, raw)
        return widget, "UR3", SetValue(widget.path, value), f"value {raw!r}"

    if widget.kind == "radio" and widget.value_type == "boolean":
        if raw is None or raw not in ("true", "false"):
            errors.append((widget.name, "expected 'true' or 'false'"))
            return None
        return widget, "UR4", SetValue(widget.path, raw == "true"), f"value {raw!r}"

    if widget.kind == "radio":
        option_values = {v for v, _ in widget.options}
        if raw is None or raw not in option_values:
            errors.append((widget.name, "a choice is required"))
            return None
        return widget, "UR1", ResolveGroup(widget.path, (f"{widget.path}.{raw}",)), f"chose {raw!r}"

    if widget.kind == "checkbox" and isinstance(node, FeatureGroup):
        chosen = tuple(part for part in (raw or "").split(",") if part)
        option_values = {v for v, _ in widget.options}
        bad = [c for c in chosen if c not in option_values]
        if bad:
            errors.append((widget.name, f"unknown members: {', '.join(bad)}"))
            return None
        if widget.required and not chosen:
            errors.append((widget.name, "at least one choice is required"))
            return None
        decision = ResolveGroup(widget.path, tuple(f"{widget.path}.{c}" for c in chosen))
        return widget, "UR2", decision, f"chose {','.join(chosen) or '(none)'}"

    if widget.kind == "checkbox":
        if raw is not None and raw != "":
            return widget, "UR2", Select(widget.path), "selected"
        return widget, "UR2", Eliminate(widget.path), "eliminated"

    if widget.kind == "select":
        option_values = {v for v, _ in widget.options}
        if raw is None or raw not in option_values:
            errors.append((widget.name, "a count from the offered range is required"))
            return None
        return widget, "UR5", Clone(widget.path, int(raw)), f"count {raw}"

    errors.append((widget.name, f"unknown widget kind {widget.kind!r}"))
    return None


def _apply_agreeing(app: ApplicationFeatureModel, widget: InputWidget, decision: object,
                    ) -> tuple[bool, ApplicationFeatureModel]:
    """Apply a decision unless an earlier answer's propagation already produced the same state."""
    from .configuration import specialize

    if isinstance(decision, SetValue):
        existing = app.values.get(decision.path)
        if existing is not None:
            if existing == decision.value:
                return False, app
            raise DecisionConflictError(decision.path, decision.path, "value already set differently")
        return True, specialize(app, decision)

    if isinstance(decision, Select) and app.states.get(decision.path) == SELECTED:
        return False, app
    if isinstance(decision, Eliminate) and app.states.get(decision.path) == ELIMINATED:
        return False, app
    if isinstance(decision, Clone) and decision.path in app.clones:
        if app.clones[decision.path] == decision.count:
            return False, app
        raise DecisionConflictError(decision.path, decision.path, "clone count already decided differently")
    if isinstance(decision, ResolveGroup):
        member_states = {p: app.states.get(p) for p in _member_paths(app, decision.path)}
        if all(s != UNDECIDED for s in member_states.values()):
            wanted = set(decision.chosen)
            actual = {p for p, s in member_states.items() if s == SELECTED}
            if wanted <= actual:
                return False, app
            raise DecisionConflictError(decision.path, decision.path, "group already resolved differently")
    return True, specialize(app, decision)


def _member_paths(app: ApplicationFeatureModel, group_path: str) -> list[str]:
    group = app.family.node_at(node_path_of(group_path))
    return [f"{group_path}.{m.name}" for m in group.children]


# ---------------------------------------------------------------------------
# T: feature model -> report


def fm_to_report(app: ApplicationFeatureModel, citizen_id: str = ""):
    """Report of every stored value and resolved group choice, in document order."""
    from .configuration import iter_instances, _is_clone_base
    from .cui_model import Report, ReportField

    remaining = open_items(app)
    if remaining or not is_complete(app):
        raise IncompleteModelError(remaining)

    fields: list[ReportField] = []
    for ip, node in iter_instances(app):
        if app.states.get(ip) != SELECTED:
            continue
        if isinstance(node, FeatureGroup):
            chosen = [m.name for m in node.children if app.states.get(f"{ip}.{m.name}") == SELECTED]
            fields.append(ReportField(path=ip, value=",".join(chosen),
                                      label=node.description or node.name))
        elif node.attribute is not None and not _is_clone_base(ip, node) and ip in app.values:
            fields.append(ReportField(path=ip, value=value_to_text(app.values[ip]),
                                      label=node.description or node.name))
    return Report(
        service_name=app.family.name,
        citizen_id=citizen_id,
        fields=tuple(fields),
        completed_at=datetime.now(timezone.utc),
    )


# ---------------------------------------------------------------------------
# Registry dump


def rule_registry() -> list[dict]:
    """All built-in rules as plain dictionaries (documentation / trace tooling)."""
    entries = []
    for rule in default_fm_to_cui_rules().rules:
        entries.append({"id": rule.id, "direction": rule.direction, "summary": rule.summary,
                        "extension": rule.extension})
    for rule_id, summary in (
        ("UR1", "radio answer resolves its group"),
        ("UR2", "checkbox answers select/eliminate optional features and group members"),
        ("UR3", "text answer becomes a typed value"),
        ("UR4", "yes/no answer becomes a boolean value"),
        ("UR5", "count answer clones its feature"),
    ):
        entries.append({"id": rule_id, "direction": CUI_TO_FM, "summary": summary,
                        "extension": rule_id in ("UR2", "UR4", "UR5")})
    for rule_id, summary in (
        ("RR1", "stored value becomes a report field"),
        ("RR2", "resolved group choice becomes a report field"),
    ):
        entries.append({"id": rule_id, "direction": FM_TO_REPORT, "summary": summary, "extension": False})
    return entries


def rule_registry_json() -> str:
    return json.dumps(rule_registry(), ensure_ascii=False, indent=2) + "\n"
