"""Widget model, HTML emission, wire JSON, and report rendering."""

import xml.etree.ElementTree as ET

import pytest

from formweave.cui_model import (
    CuiError,
    InputWidget,
    LayoutWidget,
    NavigationWidget,
    OutputWidget,
    Page,
    Report,
    ReportField,
    page_from_wire,
    page_to_wire,
    render_html,
    render_report,
)


def text_input(name="F.Name", label="Full name", prefill=None):
    return InputWidget(kind="text", name=name, path=name, label=label,
                       value_type="string", prefill=prefill)


def radio_group(name="F.G", options=(("A", "A"), ("B", "B"), ("C", "C"))):
    return InputWidget(kind="radio", name=name, path=name, label="Pick one", options=tuple(options))


def page_of(*widgets, id="page-001", title="Test form"):
    return Page(id=id, title=title, widgets=tuple(widgets))


def parse_html(document: str) -> ET.Element:
    # the emitter produces XML-clean markup after the doctype line
    return ET.fromstring(document.split("\n", 1)[1])


class TestRenderHtml:
    def test_label_then_text_input(self):
        html = render_html(page_of(text_input(), NavigationWidget()))
        label_at = html.index("<label")
        input_at = html.index('<input type="text"')
        assert label_at < input_at
        assert 'name="F.Name"' in html
        assert 'value=""' in html

    def test_radio_options_share_one_name(self):
        html = render_html(page_of(radio_group()))
        assert html.count('<input type="radio" name="F.G"') == 3

    def test_empty_page_is_a_form_skeleton(self):
        html = render_html(page_of())
        root = parse_html(html)
        assert root.tag == "html"
        assert root.find("head/title").text == "Test form"
        assert root.find("body/form") is not None
        assert len(list(root.find("body/form"))) == 0

    def test_document_is_well_formed_with_one_control_per_widget(self):
        page = page_of(
            OutputWidget(text="Section"),
            text_input(),
            radio_group(),
            InputWidget(kind="checkbox", name="F.O", path="F.O", options=(("O", "Opt"),), required=False),
            InputWidget(kind="select", name="F.C", path="F.C", options=(("1", "1"), ("2", "2"))),
            LayoutWidget(kind="line-break"),
            NavigationWidget(kind="submit"),
        )
        root = parse_html(render_html(page))
        inputs = root.findall(".//input")
        selects = root.findall(".//select")
        # text: 1, radio: one per option (3), checkbox: 1, submit: 1
        assert len(inputs) == 1 + 3 + 1 + 1
        assert len(selects) == 1
        assert len(selects[0].findall("option")) == 2

    def test_prefill_rendered_as_value(self):
        html = render_html(page_of(text_input(prefill="Jansen")))
        assert 'value="Jansen"' in html

    def test_escaping(self):
        html = render_html(page_of(text_input(label='A & B <c>', prefill='"x"')))
        assert "A &amp; B &lt;c&gt;" in html
        root = parse_html(html)
        assert root.find(".//input").get("value") == '"x"'

    def test_deterministic(self):
        page = page_of(text_input(), radio_group(), NavigationWidget())
        assert render_html(page) == render_html(page)


class TestWireFormat:
    def test_text_widget_wire_fields(self):
        wire = page_to_wire(page_of(text_input(prefill="x")))
        import json

        data = json.loads(wire)
        widget = data["widgets"][0]
        assert widget["kind"] == "text"
        assert widget["name"] == "F.Name"
        assert widget["required"] is True
        assert widget["prefill"] == "x"
        assert list(widget)[:2] == ["kind", "name"]

    def test_navigation_submit_wire(self):
        import json

        data = json.loads(page_to_wire(page_of(NavigationWidget())))
        assert data["widgets"][0] == {"kind": "submit"}

    def test_wire_round_trip_is_stable(self):
        page = page_of(
            text_input(),
            radio_group(),
            OutputWidget(text="hello"),
            LayoutWidget(kind="line-break"),
            NavigationWidget(),
        )
        wire = page_to_wire(page)
        assert page_to_wire(page_from_wire(wire)) == wire

    def test_wire_is_lossless_for_rendering(self):
        page = page_of(text_input(prefill="y"), radio_group(), NavigationWidget())
        assert render_html(page_from_wire(page_to_wire(page))) == render_html(page)

    def test_unknown_widget_rejected(self):
        with pytest.raises(CuiError):
            page_from_wire('{"pageId": "p", "title": "t", "widgets": [{"kind": "slider"}]}')


class TestReports:
    def report(self, fields):
        return Report(service_name="Svc", citizen_id="C1", fields=tuple(fields))

    def test_xml_fields_in_order(self):
        doc = render_report(self.report([
            ReportField(path="S.A", value="1", label="A"),
            ReportField(path="S.B", value="2", label="B"),
        ]), "xml")
        root = ET.fromstring(doc)
        assert [f.get("path") for f in root.findall("Field")] == ["S.A", "S.B"]
        assert root.get("service") == "Svc"

    def test_choice_only_report(self):
        doc = render_report(self.report([ReportField(path="S.G", value="Private", label="Area")]), "xml")
        root = ET.fromstring(doc)
        assert root.find("Field").get("value") == "Private"

    def test_text_format_line_per_field(self):
        doc = render_report(self.report([
            ReportField(path="S.A", value="1", label="A"),
            ReportField(path="S.B", value="2", label="B"),
        ]), "text")
        assert doc == "A: 1\nB: 2\n"

    def test_rendering_is_deterministic(self):
        report = self.report([ReportField(path="S.A", value="1", label="A")])
        assert render_report(report, "xml") == render_report(report, "xml")

    def test_timestamp_not_in_rendered_output(self):
        import datetime

        report = Report(service_name="Svc", citizen_id="C1",
                        fields=(ReportField(path="S.A", value="1", label="A"),),
                        completed_at=datetime.datetime(2026, 1, 1))
        assert "2026" not in render_report(report, "xml")

    def test_unknown_format_rejected(self):
        with pytest.raises(CuiError):
            render_report(self.report([]), "pdf")
