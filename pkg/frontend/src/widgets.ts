// DOM rendering for wire pages and answer collection back out of the form.

import {
  InputWidget,
  LAYOUT_KINDS,
  NAVIGATION_KINDS,
  Widget,
  WidgetError,
  WirePage,
  isInput,
  isOutput,
} from "./wire.js";

export function renderPage(page: WirePage): HTMLFormElement {
  const form = document.createElement("form");
  form.className = "fw-page";
  form.dataset.pageId = page.pageId;

  const heading = document.createElement("h2");
  heading.textContent = page.title;
  form.appendChild(heading);

  for (const widget of page.widgets) {
    form.appendChild(renderWidget(widget));
  }
  return form;
}

function renderWidget(widget: Widget): HTMLElement {
  if (isInput(widget)) {
    return renderInput(widget);
  }
  if (isOutput(widget)) {
    const row = document.createElement("div");
    row.className = "fw-output";
    row.textContent = widget.text;
    return row;
  }
  if (NAVIGATION_KINDS.includes(widget.kind)) {
    const button = document.createElement("button");
    button.type = widget.kind === "submit" ? "submit" : "button";
    button.name = widget.kind;
    button.textContent = widget.kind === "submit" ? "Submit" : widget.kind;
    return button;
  }
  if (LAYOUT_KINDS.includes(widget.kind)) {
    return widget.kind === "line-break"
      ? document.createElement("br")
      : document.createElement("div");
  }
  // forward compatibility: an unknown widget stays visible instead of vanishing
  console.warn(`unknown widget kind: ${widget.kind}`);
  const placeholder = document.createElement("div");
  placeholder.className = "fw-placeholder";
  placeholder.textContent = `[unsupported widget: ${widget.kind}]`;
  return placeholder;
}

function renderInput(widget: InputWidget): HTMLElement {
  const row = document.createElement("div");
  row.className = "fw-row";
  row.dataset.widget = widget.name;

  const label = document.createElement("label");
  label.textContent = widget.label ?? widget.path.split(".").pop() ?? widget.name;
  if (widget.required) {
    label.className = "fw-required";
  }
  row.appendChild(label);

  switch (widget.kind) {
    case "text": {
      const input = document.createElement("input");
      input.type = "text";
      input.name = widget.name;
      input.value = widget.prefill ?? "";
      row.appendChild(input);
      break;
    }
    case "radio": {
      for (const option of widget.options) {
        const wrap = document.createElement("label");
        wrap.className = "fw-option";
        const input = document.createElement("input");
        input.type = "radio";
        input.name = widget.name;
        input.value = option.value;
        if (widget.prefill === option.value) {
          input.checked = true;
        }
        wrap.appendChild(input);
        wrap.appendChild(document.createTextNode(option.label));
        row.appendChild(wrap);
      }
      break;
    }
    case "checkbox": {
      for (const option of widget.options) {
        const wrap = document.createElement("label");
        wrap.className = "fw-option";
        const input = document.createElement("input");
        input.type = "checkbox";
        input.name = widget.name;
        input.value = option.value;
        wrap.appendChild(input);
        wrap.appendChild(document.createTextNode(option.label));
        row.appendChild(wrap);
      }
      break;
    }
    case "select": {
      const select = document.createElement("select");
      select.name = widget.name;
      for (const option of widget.options) {
        const el = document.createElement("option");
        el.value = option.value;
        el.textContent = option.label;
        if (widget.prefill === option.value) {
          el.selected = true;
        }
        select.appendChild(el);
      }
      row.appendChild(select);
      break;
    }
    default: {
      console.warn(`unknown input kind: ${widget.kind}`);
      const placeholder = document.createElement("span");
      placeholder.className = "fw-placeholder";
      placeholder.textContent = `[unsupported input: ${widget.kind}]`;
      row.appendChild(placeholder);
    }
  }
  return row;
}

/** Read answers out of the form, keyed strictly by the page model's widget names. */
export function collectAnswers(form: HTMLFormElement, page: WirePage): Record<string, string> {
  const answers: Record<string, string> = {};
  for (const widget of page.widgets) {
    if (!isInput(widget)) {
      continue;
    }
    const controls = Array.from(
      form.querySelectorAll<HTMLInputElement | HTMLSelectElement>(`[name="${cssEscape(widget.name)}"]`),
    );
    if (controls.length === 0) {
      continue;
    }
    switch (widget.kind) {
      case "text":
        answers[widget.name] = (controls[0] as HTMLInputElement).value;
        break;
      case "radio": {
        const checked = controls.find((c) => (c as HTMLInputElement).checked);
        if (checked) {
          answers[widget.name] = (checked as HTMLInputElement).value;
        }
        break;
      }
      case "checkbox": {
        const checked = controls
          .filter((c) => (c as HTMLInputElement).checked)
          .map((c) => (c as HTMLInputElement).value);
        if (checked.length > 0) {
          answers[widget.name] = checked.join(",");
        }
        break;
      }
      case "select":
        answers[widget.name] = (controls[0] as HTMLSelectElement).value;
        break;
    }
  }
  return answers;
}

export function clearFieldErrors(form: HTMLFormElement): void {
  for (const el of Array.from(form.querySelectorAll(".fw-field-error"))) {
    el.remove();
  }
}

/** Attach one inline error next to its widget row; unmatched errors go to the form top. */
export function annotateErrors(form: HTMLFormElement, errors: WidgetError[]): void {
  clearFieldErrors(form);
  for (const error of errors) {
    const note = document.createElement("span");
    note.className = "fw-field-error";
    note.setAttribute("role", "alert");
    note.textContent = error.message;
    const row = error.widget
      ? form.querySelector<HTMLElement>(`[data-widget="${cssEscape(error.widget)}"]`)
      : null;
    if (row) {
      row.appendChild(note);
    } else {
      form.prepend(note);
    }
  }
}

function cssEscape(value: string): string {
  return value.replace(/["\\\]\[]/g, (c) => `\\${c}`);
}
