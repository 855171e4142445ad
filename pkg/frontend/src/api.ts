// Thin typed client over the review server HTTP API.
//
// Network failures throw NetworkError so the caller can queue the action
// for a later flush; 409/422 responses come back as structured outcomes
// because they need UI handling, not retries.

import type { DecisionOutcome, DecisionRequest, QueuePage, StatsResponse } from './types';

export class NetworkError extends Error {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    readonly reviewer: string,
    private readonly token?: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(json = false): Record<string, string> {
    const out: Record<string, string> = {};
    if (json) out['Content-Type'] = 'application/json';
    if (this.token) out['X-Auth-Token'] = this.token;
    return out;
  }

  private async get(path: string): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, { headers: this.headers() });
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!response.ok) throw new Error(`GET ${path} -> ${response.status}`);
    return response;
  }

  async fetchQueue(cursor = '', n = 10): Promise<QueuePage> {
    const params = new URLSearchParams({ n: String(n), reviewer: this.reviewer });
    if (cursor) params.set('cursor', cursor);
    const response = await this.get(`/api/queue?${params}`);
    return (await response.json()) as QueuePage;
  }

  async fetchStats(): Promise<StatsResponse> {
    const response = await this.get('/api/stats');
    return (await response.json()) as StatsResponse;
  }

  async postDecision(decision: DecisionRequest): Promise<DecisionOutcome> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/api/decision`, {
        method: 'POST',
        headers: this.headers(true),
        body: JSON.stringify(decision),
      });
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (response.ok) {
      const body = (await response.json()) as { item: QueuePage['items'][number] };
      return { kind: 'ok', item: body.item };
    }
    const detail = await response
      .json()
      .then((b: { detail?: string }) => b.detail ?? `HTTP ${response.status}`)
      .catch(() => `HTTP ${response.status}`);
    if (response.status === 409) return { kind: 'conflict', detail };
    return { kind: 'invalid', detail };
  }
}
