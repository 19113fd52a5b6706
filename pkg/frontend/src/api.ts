/** Typed client for the record service. All mutation goes through
 * POST /review/{id}; everything else is read-only. */

import type {
  DopantEntry,
  ElementsPayload,
  ErrorPayload,
  HistogramPayload,
  QueuePage,
  RecordEdit,
  RecordPayload,
  ReviewAction,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details: unknown = null,
  ) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, "network", err instanceof Error ? err.message : String(err));
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const payload = (body ?? {}) as Partial<ErrorPayload>;
      throw new ApiError(
        response.status,
        payload.code ?? "http_error",
        payload.message ?? `HTTP ${response.status}`,
        payload.details ?? null,
      );
    }
    return body as T;
  }

  fetchQueue(limit = 50, offset = 0): Promise<QueuePage> {
    return this.request<QueuePage>(`/review/queue?limit=${limit}&offset=${offset}`);
  }

  getRecord(id: number): Promise<RecordPayload> {
    return this.request<RecordPayload>(`/records/${id}`);
  }

  submitReview(
    id: number,
    action: ReviewAction,
    options: { record?: RecordEdit; reviewer?: string } = {},
  ): Promise<RecordPayload> {
    return this.request<RecordPayload>(`/review/${id}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        action,
        reviewer: options.reviewer ?? "reviewer",
        record: options.record,
      }),
    });
  }

  histogram(edges: number[]): Promise<HistogramPayload> {
    return this.request<HistogramPayload>(`/stats/histogram?edges=${edges.join(",")}`);
  }

  elements(lo: number, hi: number): Promise<ElementsPayload> {
    return this.request<ElementsPayload>(`/stats/elements?lo=${lo}&hi=${hi}`);
  }

  dopants(base: string, k = 5): Promise<{ base: string; dopants: DopantEntry[] }> {
    return this.request(`/stats/dopants?base=${encodeURIComponent(base)}&k=${k}`);
  }
}
