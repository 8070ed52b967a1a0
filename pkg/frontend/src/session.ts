// One browser session: page rendering, local validation, submission, report view.

import { Api, PageResult, ValidationFailure } from "./api.js";
import { validateText } from "./lexical.js";
import { WirePage, isInput } from "./wire.js";
import { annotateErrors, clearFieldErrors, collectAnswers, renderPage } from "./widgets.js";

export type Phase = "collecting" | "complete" | "reported";

export class ClientSession {
  sessionId = "";
  phase: Phase = "collecting";
  currentPage: WirePage | null = null;

  constructor(
    readonly api: Api,
    readonly serviceName: string,
    readonly mode: string,
    readonly citizenId: string,
  ) {}

  async start(): Promise<void> {
    this.sessionId = await this.api.createSession(this.serviceName, this.citizenId, this.mode);
    await this.refresh();
  }

  async refresh(): Promise<void> {
    this.apply(await this.api.getPage(this.sessionId));
  }

  /** Local lexical pass mirroring the server; never lets through what the server rejects. */
  validateLocally(page: WirePage, answers: Record<string, string>): { widget: string; message: string }[] {
    const problems: { widget: string; message: string }[] = [];
    for (const widget of page.widgets) {
      if (!isInput(widget)) {
        continue;
      }
      const value = answers[widget.name];
      if (value === undefined) {
        if (widget.required && widget.kind !== "checkbox") {
          problems.push({ widget: widget.name, message: "a value is required" });
        } else if (widget.required && widget.kind === "checkbox") {
          problems.push({ widget: widget.name, message: "at least one choice is required" });
        }
        continue;
      }
      if (widget.kind === "text") {
        const message = validateText(widget.valueType, value);
        if (message !== null) {
          problems.push({ widget: widget.name, message });
        }
      }
    }
    return problems;
  }

  /** POST answers; a 422 keeps the session collecting and reports the server's errors. */
  async submit(answers: Record<string, string>): Promise<ValidationFailure | null> {
    const result = await this.api.postAnswers(this.sessionId, answers);
    if (result.kind === "rejected") {
      return result.failure;
    }
    this.apply(result);
    return null;
  }

  private apply(result: PageResult): void {
    if (result.kind === "complete") {
      this.phase = "complete";
      this.currentPage = null;
    } else if (result.kind === "page") {
      this.phase = "collecting";
      this.currentPage = result.page;
    }
  }

  async reportText(): Promise<string> {
    const text = await this.api.getReport(this.sessionId, "text");
    this.phase = "reported";
    return text;
  }
}

export interface SessionViewHooks {
  onReport?: (text: string) => void;
}

/** Mount the form-filling loop into a container; resolves when the report is shown. */
export async function runSessionView(
  container: HTMLElement,
  session: ClientSession,
  hooks: SessionViewHooks = {},
): Promise<void> {
  return new Promise((resolve, reject) => {
    const showPage = (page: WirePage) => {
      container.replaceChildren();
      const form = renderPage(page);
      form.addEventListener("submit", (event) => {
        event.preventDefault();
        void handleSubmit(form, page);
      });
      container.appendChild(form);
    };

    const showReport = async () => {
      const text = await session.reportText();
      container.replaceChildren();
      const view = document.createElement("div");
      view.className = "fw-report";
      const heading = document.createElement("h2");
      heading.textContent = "Request submitted";
      const body = document.createElement("pre");
      body.textContent = text;
      const download = document.createElement("a");
      download.href = session.api.reportUrl(session.sessionId, "xml");
      download.textContent = "Download the report (XML)";
      download.className = "fw-download";
      view.append(heading, body, download);
      container.appendChild(view);
      hooks.onReport?.(text);
      resolve();
    };

    const handleSubmit = async (form: HTMLFormElement, page: WirePage) => {
      const answers = collectAnswers(form, page);
      const local = session.validateLocally(page, answers);
      if (local.length > 0) {
        annotateErrors(form, local);
        return;
      }
      clearFieldErrors(form);
      let failure;
      try {
        failure = await session.submit(answers);
      } catch (error) {
        showRetry(form, () => void handleSubmit(form, page));
        return;
      }
      if (failure) {
        annotateErrors(form, failure.errors);
        return;
      }
      if (session.phase === "collecting" && session.currentPage) {
        showPage(session.currentPage);
      } else {
        void showReport().catch(reject);
      }
    };

    if (session.phase === "collecting" && session.currentPage) {
      showPage(session.currentPage);
    } else {
      void showReport().catch(reject);
    }
  });
}

function showRetry(form: HTMLFormElement, retry: () => void): void {
  if (form.querySelector(".fw-retry")) {
    return;
  }
  const note = document.createElement("div");
  note.className = "fw-retry";
  note.textContent = "The service could not be reached. ";
  const button = document.createElement("button");
  button.type = "button";
  button.textContent = "Retry";
  button.addEventListener("click", () => {
    note.remove();
    retry();
  });
  note.appendChild(button);
  form.prepend(note);
}
