// Wire types for the review server API.

export interface ReviewItem {
  candidate_id: string;
  image_id: string;
  image_url: string;
  question: string;
  question_type: string;
  ground_truth: string;
  negative: string;
  feedback: string | null;
  filter_flags: string[];
  revision: number;
}

export interface QueuePage {
  items: ReviewItem[];
  cursor: string;
}

export type DecisionAction = 'approve' | 'reject' | 'edit_negative' | 'edit_feedback';

export interface DecisionRequest {
  candidate_id: string;
  action: DecisionAction;
  payload?: string | null;
  reviewer: string;
  base_revision: number;
}

export interface FunnelCounts {
  raw: number;
  generation_ok: number;
  after_auto_filter: number;
  corrected: number;
  after_feedback_filter: number;
  approved: number;
}

export interface TypeRow {
  type: string;
  count: number;
  proportion: number;
}

export interface StatsResponse {
  funnel: FunnelCounts;
  statuses: Record<string, number>;
  flags: Record<string, number>;
  types: TypeRow[];
  total: number;
}

export type DecisionOutcome =
  | { kind: 'ok'; item: ReviewItem }
  | { kind: 'conflict'; detail: string }
  | { kind: 'invalid'; detail: string };
