// Wire page model as served by GET /sessions/{id}/page.

export interface WireOption {
  value: string;
  label: string;
}

export interface InputWidget {
  kind: string; // text | radio | checkbox | select (unknown kinds get a placeholder)
  name: string;
  path: string;
  label: string | null;
  valueType: string | null;
  required: boolean;
  prefill: string | null;
  options: WireOption[];
}

export interface OutputWidget {
  text: string;
}

export interface ControlWidget {
  kind: string; // submit | next | back | group-start | group-end | line-break
}

export type Widget = InputWidget | OutputWidget | ControlWidget;

export interface WirePage {
  pageId: string;
  title: string;
  widgets: Widget[];
}

export interface ServiceEntry {
  serviceName: string;
  title: string;
}

export interface WidgetError {
  widget: string | null;
  message: string;
}

export function isInput(widget: Widget): widget is InputWidget {
  return "name" in widget;
}

export function isOutput(widget: Widget): widget is OutputWidget {
  return "text" in widget && !("name" in widget);
}

export const NAVIGATION_KINDS = ["submit", "next", "back"];
export const LAYOUT_KINDS = ["group-start", "group-end", "line-break"];
