import type { Axis, CaseInfo, ClickLabel, SessionSummary, SlicePayload } from './types';

/** Thin typed client for the /v1 session API. Click/undo requests within one
 * session are chained so at most one is in flight at a time (the server
 * serializes per session; queueing keeps the UI responsive and ordered). */
export class ApiClient {
  private queue: Promise<unknown> = Promise.resolve();

  constructor(
    public baseUrl: string = '',
    private fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1${path}`, init);
    const body = await resp.json();
    if (!resp.ok) {
      const message = body && body.message ? body.message : resp.statusText;
      throw new ApiError(resp.status, body?.code ?? 'error', message);
    }
    return body as T;
  }

  private serialized<T>(fn: () => Promise<T>): Promise<T> {
    const next = this.queue.then(fn, fn);
    this.queue = next.catch(() => undefined);
    return next;
  }

  listCases(): Promise<CaseInfo[]> {
    return this.request('/cases');
  }

  createSession(caseId: string): Promise<SessionSummary> {
    return this.request('/sessions', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ case_id: caseId }),
    });
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request(`/sessions/${sessionId}`);
  }

  applyClick(
    sessionId: string,
    coord: [number, number, number],
    label: ClickLabel,
  ): Promise<SessionSummary> {
    return this.serialized(() =>
      this.request(`/sessions/${sessionId}/clicks`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ coord, label }),
      }),
    );
  }

  undo(sessionId: string): Promise<SessionSummary> {
    return this.serialized(() =>
      this.request(`/sessions/${sessionId}/undo`, { method: 'POST' }),
    );
  }

  getSlice(sessionId: string, axis: Axis, index: number): Promise<SlicePayload> {
    return this.request(`/sessions/${sessionId}/slices/${axis}/${index}`);
  }
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}
