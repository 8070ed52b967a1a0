"""Concrete UI model: pages of widgets, the HTML emitter, wire JSON, and completion reports."""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Union
from xml.sax.saxutils import quoteattr

INPUT_KINDS = ("text", "radio", "checkbox", "select")
NAVIGATION_KINDS = ("submit", "next", "back")
LAYOUT_KINDS = ("group-start", "group-end", "line-break")

LABEL_STYLE = "width: 150px"


class CuiError(Exception):
    pass


@dataclass(frozen=True)
class InputWidget:
    kind: str  # text | radio | checkbox | select
    name: str  # form control name
    path: str  # instance path in the application model
    label: str | None = None
    value_type: str | None = None
    required: bool = True
    prefill: str | None = None
    options: tuple[tuple[str, str], ...] = ()  # (value, label)


@dataclass(frozen=True)
class OutputWidget:
    text: str


@dataclass(frozen=True)
class NavigationWidget:
    kind: str = "submit"


@dataclass(frozen=True)
class LayoutWidget:
    kind: str = "line-break"


Widget = Union[InputWidget, OutputWidget, NavigationWidget, LayoutWidget]


@dataclass(frozen=True)
class Page:
    id: str
    title: str
    widgets: tuple[Widget, ...] = ()

    def input_widgets(self) -> list[InputWidget]:
        return [w for w in self.widgets if isinstance(w, InputWidget)]


@dataclass(frozen=True)
class WebApplication:
    service_name: str
    pages: tuple[Page, ...]


@dataclass(frozen=True)
class ReportField:
    path: str
    value: str
    label: str


@dataclass(frozen=True)
class Report:
    service_name: str
    citizen_id: str
    fields: tuple[ReportField, ...]
    completed_at: datetime | None = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# HTML emission


def render_html(page: Page) -> str:
    """One self-contained, deterministic HTML document for the page.

    The markup is XML-clean (self-closed void elements) so structural checks can
    parse it with a plain XML parser after dropping the doctype.
    """
    lines = [
        "<!DOCTYPE html>",
        "<html>",
        "<head>",
        f"<title>{html.escape(page.title)}</title>",
        "</head>",
        "<body>",
        '<form method="post">',
    ]
    for widget in page.widgets:
        lines.extend(_render_widget(widget))
    lines.append("</form>")
    lines.append("</body>")
    lines.append("</html>")
    return "\n".join(lines) + "\n"


def _render_widget(widget: Widget) -> list[str]:
    if isinstance(widget, OutputWidget):
        return [f'<label style="{LABEL_STYLE}">{html.escape(widget.text)}</label>', "<br/>"]
    if isinstance(widget, NavigationWidget):
        if widget.kind == "submit":
            return ['<input type="submit" value="Submit"/>']
        return [f'<button type="button" name={quoteattr(widget.kind)}>{html.escape(widget.kind.title())}</button>']
    if isinstance(widget, LayoutWidget):
        if widget.kind == "line-break":
            return ["<br/>"]
        return [f"<!-- {widget.kind} -->"]

    lines: list[str] = []
    if widget.label is not None:
        lines.append(f'<label style="{LABEL_STYLE}">{html.escape(widget.label)}</label>')
    name = quoteattr(widget.name)
    if widget.kind == "text":
        value = quoteattr(widget.prefill if widget.prefill is not None else "")
        lines.append(f'<input type="text" name={name} value={value}/>')
    elif widget.kind in ("radio", "checkbox"):
        for value, label in widget.options:
            checked = ' checked="checked"' if widget.prefill is not None and value == widget.prefill else ""
            lines.append(f'<input type="{widget.kind}" name={name} value={quoteattr(value)}{checked}/>'
                         f"{html.escape(label)}")
    elif widget.kind == "select":
        lines.append(f"<select name={name}>")
        for value, label in widget.options:
            selected = ' selected="selected"' if widget.prefill is not None and value == widget.prefill else ""
            lines.append(f"<option value={quoteattr(value)}{selected}>{html.escape(label)}</option>")
        lines.append("</select>")
    else:
        raise CuiError(f"unknown input kind {widget.kind!r}")
    lines.append("<br/>")
    return lines


# ---------------------------------------------------------------------------
# Wire format (JSON page model)


def widget_to_wire(widget: Widget) -> dict:
    if isinstance(widget, InputWidget):
        return {
            "kind": widget.kind,
            "name": widget.name,
            "path": widget.path,
            "label": widget.label,
            "valueType": widget.value_type,
            "required": widget.required,
            "prefill": widget.prefill,
            "options": [{"value": v, "label": l} for v, l in widget.options],
        }
    if isinstance(widget, OutputWidget):
        return {"text": widget.text}
    # navigation and layout widgets both carry only their kind
    return {"kind": widget.kind}


def page_to_wire_dict(page: Page) -> dict:
    return {
        "pageId": page.id,
        "title": page.title,
        "widgets": [widget_to_wire(w) for w in page.widgets],
    }


def page_to_wire(page: Page) -> str:
    """Stable JSON for the web client; key order is fixed by construction."""
    return json.dumps(page_to_wire_dict(page), ensure_ascii=False, indent=2) + "\n"


def page_from_wire(text: str) -> Page:
    data = json.loads(text)
    widgets: list[Widget] = []
    for w in data["widgets"]:
        widgets.append(widget_from_wire(w))
    return Page(id=data["pageId"], title=data["title"], widgets=tuple(widgets))


def widget_from_wire(data: dict) -> Widget:
    if "name" in data:
        return InputWidget(
            kind=data["kind"],
            name=data["name"],
            path=data["path"],
            label=data.get("label"),
            value_type=data.get("valueType"),
            required=bool(data.get("required", True)),
            prefill=data.get("prefill"),
            options=tuple((o["value"], o["label"]) for o in data.get("options", [])),
        )
    if "text" in data:
        return OutputWidget(text=data["text"])
    kind = data.get("kind")
    if kind in NAVIGATION_KINDS:
        return NavigationWidget(kind=kind)
    if kind in LAYOUT_KINDS:
        return LayoutWidget(kind=kind)
    raise CuiError(f"unknown widget in wire form: {data!r}")


# ---------------------------------------------------------------------------
# Reports


def render_report(report: Report, format: str = "xml") -> str:
    """Deterministic report document; fields in feature-model document order."""
    if format == "xml":
        lines = ['<?xml version="1.0" encoding="UTF-8"?>',
                 f"<Report service={quoteattr(report.service_name)} citizen={quoteattr(report.citizen_id)}>"]
        for f in report.fields:
            lines.append(f"  <Field path={quoteattr(f.path)} label={quoteattr(f.label)} value={quoteattr(f.value)}/>")
        lines.append("</Report>")
        return "\n".join(lines) + "\n"
    if format == "text":
        return "".join(f"{f.label}: {f.value}\n" for f in report.fields)
    raise CuiError(f"unknown report format {format!r}")
