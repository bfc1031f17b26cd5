/** Minimal client for the suggestion service; fetch is injectable for tests. */

import type { HealthResponse, SuggestRequest, SuggestResponse } from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string }
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike
  ) {}

  async suggest(request: SuggestRequest): Promise<SuggestResponse> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/suggest`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!response.ok) {
      throw new ServiceError(response.status, `suggest failed (${response.status})`);
    }
    return (await response.json()) as SuggestResponse;
  }

  async health(): Promise<HealthResponse> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/health`);
    if (!response.ok) {
      throw new ServiceError(response.status, `health failed (${response.status})`);
    }
    return (await response.json()) as HealthResponse;
  }
}
