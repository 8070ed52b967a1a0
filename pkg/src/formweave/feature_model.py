"""Cardinality-based feature model: types, validation, canonical XML, enumeration oracle."""

from __future__ import annotations

import datetime
import itertools
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Union
from xml.sax.saxutils import quoteattr

FM_NS = "urn:formweave:fm"

VALUE_TYPES = ("string", "integer", "float", "boolean", "date")
CORE_VALUE_TYPES = ("string", "integer", "float")
EXTENDED_VALUE_TYPES = ("boolean", "date")

Value = Union[str, int, float, bool, datetime.date]

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SEGMENT_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\[([1-9][0-9]*)\])?$")

INTEGER_RE = re.compile(r"^[+-]?[0-9]+$")
FLOAT_RE = re.compile(r"^[+-]?[0-9]+\.[0-9]+$")
DATE_RE = re.compile(r"^[0-9]{4}-[0-9]{2}-[0-9]{2}$")


class FeatureModelError(Exception):
    """Base class for feature-model failures."""


class ModelParseError(FeatureModelError):
    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        context = []
        if line is not None:
            context.append(f"line {line}")
        if path is not None:
            context.append(f"path {path}")
        suffix = f" ({', '.join(context)})" if context else ""
        super().__init__(message + suffix)
        self.line = line
        self.path = path


class ModelValidationError(FeatureModelError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics) or "invalid model")
        self.diagnostics = diagnostics


class EnumerationLimitError(FeatureModelError):
    """Raised when configuration enumeration would exceed the ceiling."""


class UnknownPathError(FeatureModelError, KeyError):
    def __init__(self, path: str):
        super().__init__(f"no node at path {path!r}")
        self.path = path


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class FeatureCardinality:
    """How many clones of a solitary feature a configuration may hold; max=None is unbounded."""

    min: int = 1
    max: int | None = 1

    @property
    def allows_clones(self) -> bool:
        return self.max is None or self.max > 1

    def __str__(self) -> str:
        return f"[{self.min}..{'*' if self.max is None else self.max}]"


MANDATORY = FeatureCardinality(1, 1)
OPTIONAL = FeatureCardinality(0, 1)


@dataclass(frozen=True)
class GroupCardinality:
    """Bounds on how many members of a feature group may be selected."""

    min: int = 1
    max: int = 1

    def __str__(self) -> str:
        return f"[{self.min}..{self.max}]"


@dataclass(frozen=True)
class AttributeSpec:
    value_type: str

    @property
    def is_extended_type(self) -> bool:
        """True for types beyond the core string/integer/float trio."""
        return self.value_type in EXTENDED_VALUE_TYPES


@dataclass(frozen=True)
class Node:
    """A feature-tree node. Presets are display/default values carried by the family model."""

    name: str
    description: str | None = None
    attribute: AttributeSpec | None = None
    preset: Value | None = None
    children: tuple["AnyNode", ...] = ()


@dataclass(frozen=True)
class SolitaryFeature(Node):
    cardinality: FeatureCardinality = MANDATORY


@dataclass(frozen=True)
class FeatureGroup(Node):
    group_cardinality: GroupCardinality = GroupCardinality(1, 1)


@dataclass(frozen=True)
class GroupedFeature(Node):
    pass


@dataclass(frozen=True)
class ModelReference(Node):
    """Placeholder for another family model; inlined during parsing, never kept."""

    target: str = ""


AnyNode = Union[SolitaryFeature, FeatureGroup, GroupedFeature, ModelReference]


@dataclass(frozen=True)
class CrossTreeConstraint:
    kind: str  # "requires" | "excludes"
    source: str  # node path
    target: str  # node path


@dataclass(frozen=True)
class Diagnostic:
    path: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.rule}: {self.message}"


@dataclass(frozen=True)
class FeatureModel:
    name: str
    root: AnyNode
    constraints: tuple[CrossTreeConstraint, ...] = ()
    _index: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        index: dict[str, tuple[AnyNode, AnyNode | None]] = {}
        for path, node, parent in _walk(self.root, self.root.name, None):
            index.setdefault(path, (node, parent))
        self._index.update(index)

    def node_at(self, node_path: str) -> AnyNode:
        try:
            return self._index[node_path][0]
        except KeyError:
            raise UnknownPathError(node_path) from None

    def parent_of(self, node_path: str) -> AnyNode | None:
        try:
            return self._index[node_path][1]
        except KeyError:
            raise UnknownPathError(node_path) from None

    def has_path(self, node_path: str) -> bool:
        return node_path in self._index

    def walk(self) -> Iterator[tuple[str, AnyNode, AnyNode | None]]:
        """Yield (path, node, parent) in document (preorder) order."""
        return _walk(self.root, self.root.name, None)

    def node_count(self) -> int:
        return len(self._index)


def make_model(root: AnyNode, constraints: tuple[CrossTreeConstraint, ...] = ()) -> FeatureModel:
    return FeatureModel(name=root.name, root=root, constraints=tuple(constraints))


def _walk(node: AnyNode, path: str, parent: AnyNode | None) -> Iterator[tuple[str, AnyNode, AnyNode | None]]:
    yield path, node, parent
    for child in node.children:
        yield from _walk(child, f"{path}.{child.name}", node)


# ---------------------------------------------------------------------------
# Paths

def split_path(path: str) -> list[tuple[str, int | None]]:
    """Split an instance path into (name, clone index or None) segments."""
    segments = []
    for raw in path.split("."):
        m = _SEGMENT_RE.match(raw)
        if not m:
            raise UnknownPathError(path)
        segments.append((m.group(1), int(m.group(2)) if m.group(2) else None))
    return segments


def node_path_of(instance_path: str) -> str:
    """Strip clone indices: Move.Child[2].Name -> Move.Child.Name."""
    if "[" not in instance_path:
        return instance_path
    return ".".join(name for name, _ in split_path(instance_path))


def parent_path(path: str) -> str | None:
    if "." not in path:
        return None
    return path.rsplit(".", 1)[0]


def indexed(path: str, index: int) -> str:
    return f"{path}[{index}]"


# ---------------------------------------------------------------------------
# Typed values

def value_to_text(value: Value) -> str:
    """Canonical text form of a typed value; used in XML, HTML, wire JSON, and reports."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, datetime.date):
        return value.isoformat()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def value_to_wire(value: Value) -> object:
    """JSON-native form of a typed value (dates become ISO strings)."""
    if isinstance(value, datetime.date):
        return value.isoformat()
    return value


def text_to_value(value_type: str, text: str) -> Value:
    """Parse canonical text into a typed value; raises ValueError on lexical mismatch."""
    error = lexical_error(value_type, text)
    if error is not None:
        raise ValueError(error)
    if value_type == "string":
        return text
    if value_type == "integer":
        return int(text)
    if value_type == "float":
        return float(text)
    if value_type == "boolean":
        return text == "true"
    return datetime.date.fromisoformat(text)


def lexical_error(value_type: str, text: str) -> str | None:
    """Why `text` is not a valid literal of `value_type`, or None if it is."""
    if value_type == "string":
        return "value must not be empty" if text == "" else None
    if value_type == "integer":
        return None if INTEGER_RE.match(text) else "expected an integer (optional sign, digits)"
    if value_type == "float":
        return None if FLOAT_RE.match(text) else "expected a decimal number with a '.'"
    if value_type == "boolean":
        return None if text in ("true", "false") else "expected 'true' or 'false'"
    if value_type == "date":
        if not DATE_RE.match(text):
            return "expected an ISO date YYYY-MM-DD"
        try:
            datetime.date.fromisoformat(text)
        except ValueError:
            return "not a valid calendar date"
        return None
    raise ValueError(f"unknown value type {value_type!r}")


def value_matches_type(value_type: str, value: Value) -> bool:
    if value_type == "string":
        return isinstance(value, str)
    if value_type == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if value_type == "float":
        return isinstance(value, float) or (isinstance(value, int) and not isinstance(value, bool))
    if value_type == "boolean":
        return isinstance(value, bool)
    if value_type == "date":
        return isinstance(value, datetime.date)
    return False


# ---------------------------------------------------------------------------
# Validation

R_INVALID_NAME = "invalid-name"
R_ROOT_KIND = "root-kind"
R_ROOT_NAME = "root-name-mismatch"
R_GROUPED_OUTSIDE_GROUP = "grouped-outside-group"
R_GROUP_MEMBER_KIND = "group-member-kind"
R_GROUP_EMPTY = "group-without-members"
R_GROUP_CARD_SIZE = "group-cardinality-exceeds-size"
R_MIN_GT_MAX = "min-gt-max"
R_BAD_CARDINALITY = "bad-cardinality"
R_DUPLICATE_PATH = "duplicate-path"
R_REPEATED_NAME = "repeated-name-on-path"
R_ATTRIBUTE_ON_GROUP = "attribute-on-group"
R_BAD_VALUE_TYPE = "bad-value-type"
R_EXTENDED_VALUE_TYPE = "extended-value-type"
R_PRESET_TYPE = "preset-type-mismatch"
R_UNRESOLVED_REFERENCE = "unresolved-reference"
R_BAD_CONSTRAINT_KIND = "bad-constraint-kind"
R_DANGLING_CONSTRAINT = "dangling-constraint"
R_SELF_CONSTRAINT = "self-constraint"
R_CONSTRAINT_ON_CLONEABLE = "constraint-on-cloneable"


def validate_model(model: FeatureModel, *, core_types_only: bool = False) -> list[Diagnostic]:
    """Structural diagnostics; empty list iff every model invariant holds.

    With core_types_only, boolean/date attributes are flagged as extensions.
    """
    diags: list[Diagnostic] = []
    seen_paths: set[str] = set()

    if not isinstance(model.root, SolitaryFeature) or model.root.cardinality != MANDATORY:
        diags.append(Diagnostic(model.name, R_ROOT_KIND, "root must be a mandatory solitary feature"))
    if model.root.name != model.name:
        diags.append(Diagnostic(model.name, R_ROOT_NAME, "model name must equal root feature name"))

    def visit(node: AnyNode, path: str, parent: AnyNode | None, names_above: frozenset[str]):
        if not _IDENT_RE.match(node.name):
            diags.append(Diagnostic(path, R_INVALID_NAME, f"{node.name!r} is not an identifier"))
        if path in seen_paths:
            diags.append(Diagnostic(path, R_DUPLICATE_PATH, "path occurs more than once"))
        seen_paths.add(path)
        if node.name in names_above:
            diags.append(Diagnostic(path, R_REPEATED_NAME, "name repeats along the root-to-node path"))

        if isinstance(node, GroupedFeature) and not isinstance(parent, FeatureGroup):
            diags.append(Diagnostic(path, R_GROUPED_OUTSIDE_GROUP, "grouped feature outside a feature group"))
        if isinstance(parent, FeatureGroup) and not isinstance(node, GroupedFeature):
            diags.append(Diagnostic(path, R_GROUP_MEMBER_KIND, "feature groups may only contain grouped features"))

        if isinstance(node, ModelReference):
            diags.append(Diagnostic(path, R_UNRESOLVED_REFERENCE, f"unresolved reference to {node.target!r}"))

        if isinstance(node, SolitaryFeature):
            card = node.cardinality
            if card.min < 0 or (card.max is not None and card.max < 1):
                diags.append(Diagnostic(path, R_BAD_CARDINALITY, f"cardinality {card} out of range"))
            if card.max is not None and card.min > card.max:
                diags.append(Diagnostic(path, R_MIN_GT_MAX, f"cardinality {card} has min>max"))

        if isinstance(node, FeatureGroup):
            members = [c for c in node.children if isinstance(c, GroupedFeature)]
            g = node.group_cardinality
            if not members:
                diags.append(Diagnostic(path, R_GROUP_EMPTY, "feature group has no grouped members"))
            if g.min < 0 or g.max < 1:
                diags.append(Diagnostic(path, R_BAD_CARDINALITY, f"group cardinality {g} out of range"))
            if g.min > g.max:
                diags.append(Diagnostic(path, R_MIN_GT_MAX, f"group cardinality {g} has min>max"))
            if members and g.max > len(members):
                diags.append(
                    Diagnostic(path, R_GROUP_CARD_SIZE, f"group cardinality {g} exceeds member count {len(members)}")
                )
            if node.attribute is not None:
                diags.append(Diagnostic(path, R_ATTRIBUTE_ON_GROUP, "feature groups cannot carry attributes"))

        if node.attribute is not None:
            vt = node.attribute.value_type
            if vt not in VALUE_TYPES:
                diags.append(Diagnostic(path, R_BAD_VALUE_TYPE, f"unknown attribute type {vt!r}"))
            elif core_types_only and node.attribute.is_extended_type:
                diags.append(Diagnostic(path, R_EXTENDED_VALUE_TYPE, f"attribute type {vt!r} is an extension"))
            elif node.preset is not None and not value_matches_type(vt, node.preset):
                diags.append(Diagnostic(path, R_PRESET_TYPE, f"preset value does not match type {vt!r}"))
        elif node.preset is not None:
            diags.append(Diagnostic(path, R_PRESET_TYPE, "preset value on a node without an attribute"))

        for child in node.children:
            visit(child, f"{path}.{child.name}", node, names_above | {node.name})

    visit(model.root, model.root.name, None, frozenset())

    for c in model.constraints:
        cpath = f"{c.source}->{c.target}"
        if c.kind not in ("requires", "excludes"):
            diags.append(Diagnostic(cpath, R_BAD_CONSTRAINT_KIND, f"unknown constraint kind {c.kind!r}"))
        if c.source == c.target:
            diags.append(Diagnostic(cpath, R_SELF_CONSTRAINT, "constraint endpoints must differ"))
        for endpoint in (c.source, c.target):
            if endpoint not in seen_paths:
                diags.append(Diagnostic(endpoint, R_DANGLING_CONSTRAINT, "constraint endpoint does not resolve"))
            elif _path_touches_cloneable(model, endpoint):
                diags.append(
                    Diagnostic(endpoint, R_CONSTRAINT_ON_CLONEABLE, "constraint endpoints may not involve cloneable features")
                )
    return diags


def _path_touches_cloneable(model: FeatureModel, node_path: str) -> bool:
    segments = node_path.split(".")
    for i in range(1, len(segments) + 1):
        prefix = ".".join(segments[:i])
        if not model.has_path(prefix):
            return False
        node = model.node_at(prefix)
        if isinstance(node, SolitaryFeature) and node.cardinality.allows_clones:
            return True
    return False


# ---------------------------------------------------------------------------
# Canonical XML

_PROPERTIES_BY_TYPE = {
    "string": ("String", "StringProperties", "StringValue"),
    "integer": ("Integer", "IntegerProperties", "IntegerValue"),
    "float": ("Float", "FloatProperties", "FloatValue"),
    "boolean": ("Boolean", "BooleanProperties", "BooleanValue"),
    "date": ("Date", "DateProperties", "DateValue"),
}
_TYPE_BY_ELEMENT = {elem: vt for vt, (elem, _, _) in _PROPERTIES_BY_TYPE.items()}

Resolver = Union[Mapping[str, FeatureModel], Callable[[str], FeatureModel]]


def _q(local: str) -> str:
    return f"{{{FM_NS}}}{local}"


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _attr(elem: ET.Element, name: str, *, prefixed: bool = False) -> str | None:
    return elem.get(_q(name) if prefixed else name)


def parse_feature_model(text: str, *, resolver: Resolver | None = None, validate: bool = True) -> FeatureModel:
    """Parse canonical feature-model XML; inlines model references via the resolver.

    With validate=True (default) a model violating structural invariants raises
    ModelValidationError; validate=False returns it for diagnosis.
    """
    try:
        root_elem = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ModelParseError(f"malformed XML: {exc}", line=exc.position[0] if exc.position else None) from exc

    if root_elem.tag != _q("FeatureModel"):
        raise ModelParseError(f"expected fm:FeatureModel root, got {_local(root_elem.tag)!r}")
    name = _attr(root_elem, "value", prefixed=True)
    if not name:
        raise ModelParseError("fm:FeatureModel requires an fm:value name")

    constraints: list[CrossTreeConstraint] = []
    attribute, preset = _parse_attribute(root_elem, name)
    root = SolitaryFeature(
        name=name,
        description=_parse_description(root_elem, name),
        attribute=attribute,
        preset=preset,
        children=_parse_children(root_elem, name, constraints, resolver),
        cardinality=MANDATORY,
    )
    model = FeatureModel(name=name, root=root, constraints=tuple(constraints))
    if validate:
        diags = validate_model(model)
        if diags:
            raise ModelValidationError(diags)
    return model


def _parse_children(elem: ET.Element, path: str, constraints: list[CrossTreeConstraint],
                    resolver: Resolver | None) -> tuple[AnyNode, ...]:
    nodes: list[AnyNode] = []
    for child in elem:
        local = _local(child.tag)
        if local in ("Annotation", "Attribute"):
            continue
        if local == "Constraint":
            kind = _attr(child, "kind") or ""
            source = _attr(child, "from") or ""
            target = _attr(child, "to") or ""
            if not (kind and source and target):
                raise ModelParseError("fm:Constraint requires kind, from and to", path=path)
            constraints.append(CrossTreeConstraint(kind=kind, source=source, target=target))
            continue
        if local == "ModelReference":
            target = _attr(child, "target") or ""
            if not target:
                raise ModelParseError("fm:ModelReference requires a target", path=path)
            nodes.extend(_inline_reference(target, path, constraints, resolver))
            continue
        if local == "SolitaryFeature":
            nodes.append(_parse_feature(child, path, constraints, resolver))
            continue
        if local == "FeatureGroup":
            nodes.append(_parse_group(child, path, constraints, resolver))
            continue
        if local == "GroupedFeature":
            raise ModelParseError("fm:GroupedFeature is only allowed inside fm:FeatureGroup", path=path)
        raise ModelParseError(f"unknown element fm:{local}", path=path)
    return tuple(nodes)


def _parse_name(elem: ET.Element, parent_path: str) -> str:
    name = _attr(elem, "value", prefixed=True)
    if not name:
        raise ModelParseError(f"{_local(elem.tag)} requires an fm:value name", path=parent_path)
    return name


def _parse_cardinality(elem: ET.Element, path: str) -> FeatureCardinality:
    raw_min, raw_max = _attr(elem, "min"), _attr(elem, "max")
    if raw_min is None and raw_max is None:
        return MANDATORY
    try:
        lo = int(raw_min) if raw_min is not None else 1
        hi: int | None
        if raw_max == "*":
            hi = None
        else:
            hi = int(raw_max) if raw_max is not None else 1
    except ValueError:
        raise ModelParseError(f"bad cardinality min={raw_min!r} max={raw_max!r}", path=path) from None
    return FeatureCardinality(lo, hi)


def _parse_description(elem: ET.Element, path: str) -> str | None:
    annotations = [c for c in elem if _local(c.tag) == "Annotation"]
    if not annotations:
        return None
    if len(annotations) > 1:
        raise ModelParseError("at most one fm:Annotation per feature", path=path)
    descriptions = [c for c in annotations[0] if _local(c.tag) == "Description"]
    if len(descriptions) != 1:
        raise ModelParseError("fm:Annotation requires exactly one fm:Description", path=path)
    return _attr(descriptions[0], "value", prefixed=True) or ""


def _parse_attribute(elem: ET.Element, path: str) -> tuple[AttributeSpec | None, Value | None]:
    attrs = [c for c in elem if _local(c.tag) == "Attribute"]
    if not attrs:
        return None, None
    if len(attrs) > 1:
        raise ModelParseError("at most one attribute per feature", path=path)
    typed = list(attrs[0])
    if len(typed) != 1:
        raise ModelParseError("fm:Attribute requires exactly one type element", path=path)
    type_elem = typed[0]
    local = _local(type_elem.tag)
    if local not in _TYPE_BY_ELEMENT:
        raise ModelParseError(f"unknown attribute type element fm:{local}", path=path)
    value_type = _TYPE_BY_ELEMENT[local]
    _, props_name, value_name = _PROPERTIES_BY_TYPE[value_type]

    preset: Value | None = None
    props = [c for c in type_elem if _local(c.tag) == props_name]
    if props:
        values = [c for c in props[0] if _local(c.tag) == value_name]
        if len(values) != 1:
            raise ModelParseError(f"fm:{props_name} requires exactly one fm:{value_name}", path=path)
        raw = _attr(values[0], "value", prefixed=True)
        if raw is None:
            raise ModelParseError(f"fm:{value_name} requires fm:value", path=path)
        try:
            preset = text_to_value(value_type, raw)
        except ValueError as exc:
            raise ModelParseError(f"bad {value_type} value {raw!r}: {exc}", path=path) from None
    return AttributeSpec(value_type), preset


def _parse_feature(elem: ET.Element, parent_path: str, constraints: list[CrossTreeConstraint],
                   resolver: Resolver | None) -> SolitaryFeature:
    name = _parse_name(elem, parent_path)
    path = f"{parent_path}.{name}"
    attribute, preset = _parse_attribute(elem, path)
    return SolitaryFeature(
        name=name,
        description=_parse_description(elem, path),
        attribute=attribute,
        preset=preset,
        children=_parse_children(elem, path, constraints, resolver),
        cardinality=_parse_cardinality(elem, path),
    )


def _parse_group(elem: ET.Element, parent_path: str, constraints: list[CrossTreeConstraint],
                 resolver: Resolver | None) -> FeatureGroup:
    name = _parse_name(elem, parent_path)
    path = f"{parent_path}.{name}"
    raw_min, raw_max = _attr(elem, "gmin"), _attr(elem, "gmax")
    if raw_min is None and raw_max is None:
        cardinality = GroupCardinality(1, 1)  # missing group cardinality means exclusive choice
    else:
        try:
            cardinality = GroupCardinality(int(raw_min) if raw_min is not None else 1,
                                           int(raw_max) if raw_max is not None else 1)
        except ValueError:
            raise ModelParseError(f"bad group cardinality gmin={raw_min!r} gmax={raw_max!r}", path=path) from None
    members: list[AnyNode] = []
    for child in elem:
        local = _local(child.tag)
        if local in ("Annotation", "Attribute"):
            continue
        if local != "GroupedFeature":
            raise ModelParseError(f"fm:FeatureGroup may only contain fm:GroupedFeature, got fm:{local}", path=path)
        member_name = _parse_name(child, path)
        member_path = f"{path}.{member_name}"
        attribute, preset = _parse_attribute(child, member_path)
        members.append(GroupedFeature(
            name=member_name,
            description=_parse_description(child, member_path),
            attribute=attribute,
            preset=preset,
            children=_parse_children(child, member_path, constraints, resolver),
        ))
    attribute, _preset = _parse_attribute(elem, path)
    return FeatureGroup(
        name=name,
        description=_parse_description(elem, path),
        attribute=attribute,
        preset=_preset,
        children=tuple(members),
        group_cardinality=cardinality,
    )


def _inline_reference(target: str, host_path: str, constraints: list[CrossTreeConstraint],
                      resolver: Resolver | None) -> tuple[AnyNode, ...]:
    if resolver is None:
        raise ModelParseError(f"unresolvable reference to {target!r}: no resolver", path=host_path)
    try:
        referenced = resolver[target] if isinstance(resolver, Mapping) else resolver(target)
    except KeyError:
        raise ModelParseError(f"unresolvable reference to {target!r}", path=host_path) from None
    for c in referenced.constraints:
        constraints.append(CrossTreeConstraint(
            kind=c.kind,
            source=_rebase_path(c.source, referenced.name, host_path),
            target=_rebase_path(c.target, referenced.name, host_path),
        ))
    return referenced.root.children


def _rebase_path(path: str, old_root: str, new_prefix: str) -> str:
    if path == old_root:
        return new_prefix
    if path.startswith(old_root + "."):
        return new_prefix + path[len(old_root):]
    return path


def serialize_feature_model(model: FeatureModel) -> str:
    """Canonical UTF-8 text: fixed attribute order, model-ordered children, LF endings."""
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    root_attrs = f' xmlns:fm="{FM_NS}" fm:value={quoteattr(model.name)}'
    body: list[str] = []
    _emit_node_body(model.root, body, indent=1)
    for c in model.constraints:
        body.append(f'  <fm:Constraint kind={quoteattr(c.kind)} from={quoteattr(c.source)} to={quoteattr(c.target)}/>')
    if body:
        lines.append(f"<fm:FeatureModel{root_attrs}>")
        lines.extend(body)
        lines.append("</fm:FeatureModel>")
    else:
        lines.append(f"<fm:FeatureModel{root_attrs}/>")
    return "\n".join(lines) + "\n"


def _emit_node_body(node: AnyNode, lines: list[str], indent: int) -> None:
    pad = "  " * indent
    if node.description is not None:
        lines.append(f"{pad}<fm:Annotation>")
        lines.append(f"{pad}  <fm:Description fm:value={quoteattr(node.description)}/>")
        lines.append(f"{pad}</fm:Annotation>")
    if node.attribute is not None:
        elem, props, value_elem = _PROPERTIES_BY_TYPE[node.attribute.value_type]
        shown = node.preset
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
        _emit_child(child, lines, indent)


def _emit_child(node: AnyNode, lines: list[str], indent: int) -> None:
    pad = "  " * indent
    state_attr = ""
    if isinstance(node, SolitaryFeature):
        card = node.cardinality
        max_text = "*" if card.max is None else str(card.max)
        open_tag = (f"{pad}<fm:SolitaryFeature fm:value={quoteattr(node.name)} "
                    f'min="{card.min}" max="{max_text}"{state_attr}')
    elif isinstance(node, FeatureGroup):
        g = node.group_cardinality
        open_tag = (f"{pad}<fm:FeatureGroup fm:value={quoteattr(node.name)} "
                    f'gmin="{g.min}" gmax="{g.max}"{state_attr}')
    elif isinstance(node, GroupedFeature):
        open_tag = f"{pad}<fm:GroupedFeature fm:value={quoteattr(node.name)}{state_attr}"
    elif isinstance(node, ModelReference):
        lines.append(f"{pad}<fm:ModelReference target={quoteattr(node.target)}/>")
        return
    else:  # pragma: no cover - closed node vocabulary
        raise TypeError(f"unknown node kind {type(node).__name__}")

    body: list[str] = []
    _emit_node_body(node, body, indent + 1)
    if body:
        lines.append(open_tag + ">")
        lines.extend(body)
        lines.append(f"{pad}</fm:{type(node).__name__}>")
    else:
        lines.append(open_tag + "/>")


# ---------------------------------------------------------------------------
# Configuration enumeration (test oracle)

DEFAULT_ENUMERATION_CEILING = 100_000


def enumerate_configurations(model: FeatureModel, clone_bound: int = 2, *,
                             ceiling: int = DEFAULT_ENUMERATION_CEILING) -> list:
    """Brute-force every structure configuration (no attribute values), in deterministic order.

    Clone counts are capped at min(max, clone_bound). Raises EnumerationLimitError
    when the configuration count would exceed the ceiling.
    """
    from .configuration import ApplicationFeatureModel, SELECTED, ELIMINATED

    if clone_bound < 1:
        raise ValueError("clone_bound must be positive")

    def child_choices(node: AnyNode, path: str) -> list[dict[str, object]]:
        """All decision maps for the subtree hanging below a selected node at `path`."""
        per_child: list[list[dict[str, object]]] = []
        for child in node.children:
            cpath = f"{path}.{child.name}"
            if isinstance(child, FeatureGroup):
                options = []
                members = child.children
                g = child.group_cardinality
                for size in range(g.min, g.max + 1):
                    for combo in itertools.combinations(range(len(members)), size):
                        chosen = set(combo)
                        option: dict[str, object] = {cpath: SELECTED}
                        subs: list[list[dict[str, object]]] = []
                        for i, member in enumerate(members):
                            mpath = f"{cpath}.{member.name}"
                            if i in chosen:
                                option[mpath] = SELECTED
                                subs.append(child_choices(member, mpath))
                            else:
                                option[mpath] = ELIMINATED
                        options.extend(_merge(option, subs, ceiling))
                per_child.append(options)
            elif isinstance(child, SolitaryFeature):
                card = child.cardinality
                if card.allows_clones:
                    cap = card.max if card.max is not None else clone_bound
                    cap = max(card.min, min(cap, clone_bound))
                    options = []
                    for count in range(card.min, cap + 1):
                        if count == 0:
                            options.append({cpath: ELIMINATED})
                            continue
                        option = {cpath: SELECTED, ("#clones", cpath): count}
                        subs = [child_choices(child, indexed(cpath, i)) for i in range(1, count + 1)]
                        for i in range(1, count + 1):
                            option[indexed(cpath, i)] = SELECTED
                        options.extend(_merge(option, subs, ceiling))
                    per_child.append(options)
                elif card.min == 0:
                    options = [{cpath: ELIMINATED}]
                    options.extend(_merge({cpath: SELECTED}, [child_choices(child, cpath)], ceiling))
                    per_child.append(options)
                else:
                    per_child.append(_merge({cpath: SELECTED}, [child_choices(child, cpath)], ceiling))
            else:  # pragma: no cover - validated models have no other kinds here
                raise TypeError(f"unexpected node kind {type(child).__name__}")
        return _merge({}, per_child, ceiling)

    all_maps = _merge({model.name: SELECTED}, [child_choices(model.root, model.name)], ceiling)

    configurations = []
    for decision_map in all_maps:
        selected = {p for p, v in decision_map.items() if v == SELECTED and not isinstance(p, tuple)}
        if not _constraints_hold(model.constraints, selected):
            continue
        states = {p: v for p, v in decision_map.items() if not isinstance(p, tuple)}
        clones = {p[1]: v for p, v in decision_map.items() if isinstance(p, tuple)}
        configurations.append(ApplicationFeatureModel(
            family=model, states=states, clones=clones, values={},
        ))
    return configurations


def _merge(base: dict, sub_lists: list[list[dict]], ceiling: int) -> list[dict]:
    results = [dict(base)]
    for subs in sub_lists:
        if len(results) * len(subs) > ceiling:
            raise EnumerationLimitError(f"configuration count exceeds ceiling {ceiling}")
        results = [{**r, **s} for r in results for s in subs]
    return results


def _constraints_hold(constraints: tuple[CrossTreeConstraint, ...], selected: set[str]) -> bool:
    for c in constraints:
        if c.kind == "requires" and c.source in selected and c.target not in selected:
            return False
        if c.kind == "excludes" and c.source in selected and c.target in selected:
            return False
    return True
