// Queue/session state machine behind the review screen.
//
// Properties the tests pin down:
//  - every user action produces exactly one decision POST (offline actions
//    are queued verbatim and flushed on reconnect, never duplicated);
//  - conflicts re-fetch the queue instead of trusting local state;
//  - every displayed number originates from a server response.

import { ApiClient, NetworkError } from './api';
import type { DecisionAction, DecisionRequest, ReviewItem, StatsResponse } from './types';

export type Banner = null | { kind: 'offline'; pending: number } | { kind: 'error'; detail: string };

const BATCH_SIZE = 10;

export class ReviewController {
  private buffer: ReviewItem[] = [];
  private cursor = '';
  private exhausted = false;
  private pending: DecisionRequest[] = [];

  stats: StatsResponse | null = null;
  statsStale = false;
  banner: Banner = null;
  onChange: () => void = () => {};

  constructor(private readonly api: ApiClient) {}

  current(): ReviewItem | null {
    return this.buffer[0] ?? null;
  }

  pendingCount(): number {
    return this.pending.length;
  }

  async start(): Promise<void> {
    await this.fillBuffer();
    await this.refreshStats();
    this.onChange();
  }

  private async fillBuffer(): Promise<void> {
    if (this.buffer.length > 0 || this.exhausted) return;
    try {
      const page = await this.api.fetchQueue(this.cursor, BATCH_SIZE);
      this.buffer = page.items;
      if (page.items.length === 0) {
        this.exhausted = true;
      } else {
        this.cursor = page.cursor;
      }
    } catch (err) {
      if (err instanceof NetworkError) {
        this.banner = { kind: 'offline', pending: this.pending.length };
        return;
      }
      throw err;
    }
  }

  /** Reset paging and reload from the head of the queue (after conflicts). */
  private async reloadQueue(): Promise<void> {
    this.buffer = [];
    this.cursor = '';
    this.exhausted = false;
    await this.fillBuffer();
  }

  async refreshStats(): Promise<void> {
    try {
      this.stats = await this.api.fetchStats();
      this.statsStale = false;
    } catch {
      this.statsStale = true;
    }
  }

  async approve(): Promise<void> {
    await this.decide('approve');
  }

  async reject(): Promise<void> {
    await this.decide('reject');
  }

  async editNegative(text: string): Promise<void> {
    await this.decide('edit_negative', text);
  }

  async editFeedback(text: string): Promise<void> {
    await this.decide('edit_feedback', text);
  }

  /** Move past the current item without deciding it (stays on the server). */
  async skip(): Promise<void> {
    const item = this.current();
    if (!item) return;
    this.drop(item);
    await this.fillBuffer();
    this.onChange();
  }

  private async decide(action: DecisionAction, payload?: string): Promise<void> {
    const item = this.current();
    if (!item) return;
    const decision: DecisionRequest = {
      candidate_id: item.candidate_id,
      action,
      payload: payload ?? null,
      reviewer: this.api.reviewer,
      base_revision: item.revision,
    };
    await this.submit(decision, item);
    this.onChange();
  }

  private async submit(decision: DecisionRequest, item: ReviewItem): Promise<void> {
    let outcome;
    try {
      outcome = await this.api.postDecision(decision);
    } catch (err) {
      if (err instanceof NetworkError) {
        // No silent loss: keep the action and surface the retry banner.
        this.pending.push(decision);
        this.banner = { kind: 'offline', pending: this.pending.length };
        this.drop(item);
        return;
      }
      throw err;
    }
    if (outcome.kind === 'ok') {
      this.banner = null;
      if (decision.action === 'approve' || decision.action === 'reject') {
        this.drop(item);
        await this.fillBuffer();
      } else {
        // Edits keep the item on screen with the server's new revision.
        this.buffer[0] = outcome.item;
      }
      await this.refreshStats();
      return;
    }
    if (outcome.kind === 'conflict') {
      this.banner = { kind: 'error', detail: outcome.detail };
      await this.reloadQueue();
      await this.refreshStats();
      return;
    }
    this.banner = { kind: 'error', detail: outcome.detail };
  }

  private drop(item: ReviewItem): void {
    this.buffer = this.buffer.filter((i) => i.candidate_id !== item.candidate_id);
  }

  /** Re-send queued offline decisions in order; stops at the first outage. */
  async flushPending(): Promise<number> {
    let flushed = 0;
    while (this.pending.length > 0) {
      const decision = this.pending[0];
      try {
        const outcome = await this.api.postDecision(decision);
        this.pending.shift();
        if (outcome.kind !== 'ok') {
          this.banner = { kind: 'error', detail: outcome.detail };
        }
        flushed += 1;
      } catch (err) {
        if (err instanceof NetworkError) {
          this.banner = { kind: 'offline', pending: this.pending.length };
          this.onChange();
          return flushed;
        }
        throw err;
      }
    }
    this.banner = null;
    await this.fillBuffer();
    await this.refreshStats();
    this.onChange();
    return flushed;
  }
}
