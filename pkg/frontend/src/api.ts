import type { NextTaskResponse, Progress, SubmitBody, SubmitResponse } from './types.js';

/** Server rejected the request (4xx) with a human-readable reason. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Typed client for the annotation endpoints. Network failures surface as
 * whatever the fetch implementation throws; server rejections become
 * ApiError so callers can distinguish "retry later" from "fix the payload".
 */
export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl = '',
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async nextTask(annotatorId: string): Promise<NextTaskResponse> {
    const url = `${this.baseUrl}/api/tasks/next?annotator_id=${encodeURIComponent(annotatorId)}`;
    return this.parse(await this.fetchFn(url));
  }

  async submit(body: SubmitBody): Promise<SubmitResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/api/annotations`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    return this.parse(response);
  }

  async progress(): Promise<Progress> {
    return this.parse(await this.fetchFn(`${this.baseUrl}/api/progress`));
  }

  imageUrl(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async parse<T>(response: Response): Promise<T> {
    if (response.ok) {
      return (await response.json()) as T;
    }
    let detail = response.statusText || 'request failed';
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
}
