"""Shared builders: compact model constructors, a seeded random-model generator,
and a target-driven answer oracle used by the round-trip tests."""

from __future__ import annotations

import datetime
import random
from pathlib import Path

import pytest

from formweave.configuration import (
    ApplicationFeatureModel,
    SELECTED,
    new_configuration,
    open_items,
)
from formweave.feature_model import (
    AttributeSpec,
    CrossTreeConstraint,
    FeatureCardinality,
    FeatureGroup,
    FeatureModel,
    GroupCardinality,
    GroupedFeature,
    MANDATORY,
    OPTIONAL,
    SolitaryFeature,
    enumerate_configurations,
    make_model,
    node_path_of,
    validate_model,
    value_to_text,
)
from formweave.transform import cui_to_fm, fm_to_cui

SERVICES_DIR = Path(__file__).resolve().parent.parent / "src" / "formweave" / "services"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
VECTORS_FILE = Path(__file__).resolve().parent.parent / "shared" / "lexical_vectors.json"


def feat(name, min=1, max=1, *, desc=None, attr=None, preset=None, children=()):
    return SolitaryFeature(
        name=name,
        description=desc,
        attribute=AttributeSpec(attr) if attr else None,
        preset=preset,
        children=tuple(children),
        cardinality=FeatureCardinality(min, max),
    )


def group(name, gmin=1, gmax=1, *, desc=None, members=()):
    return FeatureGroup(
        name=name,
        description=desc,
        children=tuple(members),
        group_cardinality=GroupCardinality(gmin, gmax),
    )


def member(name, *, desc=None, attr=None, preset=None, children=()):
    return GroupedFeature(
        name=name,
        description=desc,
        attribute=AttributeSpec(attr) if attr else None,
        preset=preset,
        children=tuple(children),
    )


def model(*children, constraints=(), name="Root", desc=None):
    return make_model(
        SolitaryFeature(name=name, description=desc, children=tuple(children)),
        tuple(constraints),
    )


@pytest.fixture
def movement_model():
    """Small mixed model: mandatory value, optional, exclusive group, one constraint."""
    return model(
        feat("Applicant", desc="Applicant", children=(
            feat("Name", desc="Full name", attr="string"),
        )),
        feat("Garden", 0, 1, desc="Garden present"),
        group("Area", desc="Area kind", members=(member("Public"), member("Private"))),
        constraints=(CrossTreeConstraint("requires", "Move.Garden", "Move.Area.Private"),),
        name="Move",
    )


# ---------------------------------------------------------------------------
# Random model generation


VALUE_SAMPLES = {
    "string": lambda rng: f"s{rng.randrange(1000)}",
    "integer": lambda rng: rng.randrange(-500, 500),
    "float": lambda rng: round(rng.uniform(-100, 100), 2),
    "boolean": lambda rng: rng.random() < 0.5,
    "date": lambda rng: datetime.date(2020 + rng.randrange(6), rng.randrange(1, 13), rng.randrange(1, 29)),
}


def random_family(rng: random.Random, *, max_nodes: int = 12, max_constraints: int = 3,
                  allow_clones: bool = True) -> FeatureModel:
    """A valid family model with ≤ max_nodes nodes and at least one legal configuration."""
    while True:
        candidate = _random_tree(rng, max_nodes, allow_clones)
        constraints = _random_constraints(rng, candidate, max_constraints)
        candidate = FeatureModel(name=candidate.name, root=candidate.root, constraints=constraints)
        if validate_model(candidate):
            continue
        try:
            configs = enumerate_configurations(candidate, 2, ceiling=50_000)
        except Exception:
            continue
        if configs:
            return candidate


def _random_tree(rng: random.Random, max_nodes: int, allow_clones: bool) -> FeatureModel:
    counter = [0]

    def next_name() -> str:
        counter[0] += 1
        return f"F{counter[0]}"

    budget = [rng.randrange(5, max_nodes)]  # the root takes the last slot

    def build_children(depth: int) -> tuple:
        children = []
        while budget[0] > 0 and len(children) < 4 and rng.random() < (0.85 if depth < 2 else 0.5):
            roll = rng.random()
            if roll < 0.55 or budget[0] < 3:
                budget[0] -= 1
                name = next_name()
                attr = rng.choice([None, "string", "integer", "float", "boolean", "date"])
                lo, hi = rng.choice([(1, 1), (0, 1), (1, 1), (0, 1)])
                if allow_clones and rng.random() < 0.15:
                    lo, hi = rng.choice([(0, 2), (1, 2), (2, 2)])
                children.append(SolitaryFeature(
                    name=name,
                    description=f"Field {name}" if rng.random() < 0.7 else None,
                    attribute=AttributeSpec(attr) if attr else None,
                    children=build_children(depth + 1) if rng.random() < 0.5 else (),
                    cardinality=FeatureCardinality(lo, hi),
                ))
            else:
                size = min(rng.randrange(1, 4), max(1, budget[0] - 1))
                budget[0] -= size + 1
                gname = next_name()
                members = []
                for _ in range(size):
                    mname = next_name()
                    mattr = rng.choice([None, None, "string", "integer"])
                    members.append(GroupedFeature(
                        name=mname,
                        description=f"Choice {mname}" if rng.random() < 0.5 else None,
                        attribute=AttributeSpec(mattr) if mattr else None,
                        children=build_children(depth + 1) if rng.random() < 0.25 else (),
                    ))
                gmax = rng.randrange(1, size + 1)
                gmin = rng.randrange(0, gmax + 1)
                if gmin == 0 and rng.random() < 0.7:
                    gmin = min(1, gmax)
                children.append(FeatureGroup(
                    name=gname,
                    description=f"Group {gname}" if rng.random() < 0.5 else None,
                    children=tuple(members),
                    group_cardinality=GroupCardinality(gmin, gmax),
                ))
        return tuple(children)

    root = SolitaryFeature(name="Svc", description="Service", children=build_children(0))
    if not root.children:
        root = SolitaryFeature(name="Svc", description="Service",
                               children=(SolitaryFeature(name=next_name(), attribute=AttributeSpec("string")),))
    return make_model(root)


def _random_constraints(rng: random.Random, family: FeatureModel, max_constraints: int) -> tuple:
    from formweave.feature_model import _path_touches_cloneable

    paths = [path for path, node, _parent in family.walk()
             if path != family.name and not _path_touches_cloneable(family, path)]
    constraints = []
    if len(paths) >= 2:
        for _ in range(rng.randrange(0, max_constraints + 1)):
            source, target = rng.sample(paths, 2)
            kind = rng.choice(["requires", "excludes"])
            constraints.append(CrossTreeConstraint(kind, source, target))
    return tuple(constraints)


# ---------------------------------------------------------------------------
# Target-driven answers (the independent side of the round-trip oracle)


def pick_target(rng: random.Random, family: FeatureModel, clone_bound: int = 2) -> ApplicationFeatureModel:
    configs = enumerate_configurations(family, clone_bound)
    return rng.choice(configs)


def value_text_for(rng: random.Random, value_type: str) -> str:
    return value_to_text(VALUE_SAMPLES[value_type](rng))


def answers_toward(page, target: ApplicationFeatureModel, texts: dict[str, str],
                   rng: random.Random) -> dict[str, str]:
    """Answer a page so that the session converges on the target configuration."""
    answers: dict[str, str] = {}
    for widget in page.input_widgets():
        if widget.kind == "text":
            text = texts.setdefault(widget.path, value_text_for(rng, widget.value_type))
            answers[widget.name] = text
        elif widget.kind == "radio" and widget.value_type == "boolean":
            text = texts.setdefault(widget.path, value_text_for(rng, "boolean"))
            answers[widget.name] = text
        elif widget.kind == "radio":
            for value, _label in widget.options:
                if target.states.get(f"{widget.path}.{value}") == SELECTED:
                    answers[widget.name] = value
                    break
        elif widget.kind == "checkbox" and not isinstance(
                target.family.node_at(node_path_of(widget.path)), FeatureGroup):
            if target.states.get(widget.path) == SELECTED:
                answers[widget.name] = "on"
        elif widget.kind == "checkbox":
            chosen = [value for value, _label in widget.options
                      if target.states.get(f"{widget.path}.{value}") == SELECTED]
            if chosen:
                answers[widget.name] = ",".join(chosen)
            elif widget.required:
                raise AssertionError(f"target leaves required group {widget.path} empty")
        elif widget.kind == "select":
            answers[widget.name] = str(target.clones.get(widget.path, 0))
    return answers


def complete_by_pages(family: FeatureModel, target: ApplicationFeatureModel,
                      rng: random.Random, clone_bound: int = 2,
                      ) -> tuple[ApplicationFeatureModel, dict[str, str], int]:
    """Iterate page emission and answer conversion until completion; returns (app, texts, pages)."""
    app = new_configuration(family)
    texts: dict[str, str] = {}
    pages = 0
    for _ in range(4 * family.node_count() + 8):
        items = open_items(app)
        if not items:
            break
        page, _trace = fm_to_cui(app, items, page_id=f"page-{pages + 1:03d}", clone_bound=clone_bound)
        answers = answers_toward(page, target, texts, rng)
        app, _trace2 = cui_to_fm(app, page, answers)
        pages += 1
    return app, texts, pages
