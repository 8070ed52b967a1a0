// Thin typed wrappers over the session endpoints.

import type { ServiceEntry, WidgetError, WirePage } from "./wire.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ValidationFailure {
  constructor(readonly errors: WidgetError[], readonly page: WirePage) {}
}

export type PageResult =
  | { kind: "page"; page: WirePage }
  | { kind: "complete"; phase: string }
  | { kind: "rejected"; failure: ValidationFailure };

export class Api {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async listServices(): Promise<ServiceEntry[]> {
    const response = await fetch(this.url("/services"));
    if (!response.ok) {
      throw new ApiError(`service listing failed (${response.status})`, response.status);
    }
    return (await response.json()) as ServiceEntry[];
  }

  async createSession(service: string, citizenId: string, mode: string): Promise<string> {
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ service, citizenId, mode }),
    });
    if (response.status !== 201) {
      const body = await response.text();
      throw new ApiError(`session not created (${response.status}): ${body}`, response.status);
    }
    const data = (await response.json()) as { sessionId: string };
    return data.sessionId;
  }

  async getPage(sessionId: string): Promise<PageResult> {
    const response = await fetch(this.url(`/sessions/${sessionId}/page`));
    if (!response.ok) {
      throw new ApiError(`page fetch failed (${response.status})`, response.status);
    }
    const data = await response.json();
    if (data.phase) {
      return { kind: "complete", phase: data.phase as string };
    }
    return { kind: "page", page: data as WirePage };
  }

  async postAnswers(sessionId: string, answers: Record<string, string>): Promise<PageResult> {
    const response = await fetch(this.url(`/sessions/${sessionId}/answers`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ answers }),
    });
    if (response.status === 422) {
      const data = await response.json();
      return {
        kind: "rejected",
        failure: new ValidationFailure(data.errors as WidgetError[], data.page as WirePage),
      };
    }
    if (!response.ok) {
      throw new ApiError(`submission failed (${response.status})`, response.status);
    }
    const data = await response.json();
    if (data.phase) {
      return { kind: "complete", phase: data.phase as string };
    }
    return { kind: "page", page: data as WirePage };
  }

  async getReport(sessionId: string, format: "xml" | "text"): Promise<string> {
    const response = await fetch(this.url(`/sessions/${sessionId}/report?format=${format}`));
    if (!response.ok) {
      throw new ApiError(`report fetch failed (${response.status})`, response.status);
    }
    return await response.text();
  }

  reportUrl(sessionId: string, format: "xml" | "text"): string {
    return this.url(`/sessions/${sessionId}/report?format=${format}`);
  }
}
