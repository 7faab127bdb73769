/** Payload shapes of the review service HTTP API. */

export type ItemStatus = "pending" | "annotated" | "regenerated" | "delivered";

export interface ItemSummary {
  item_id: string;
  question: string;
  entropy: number | null;
  status: ItemStatus;
}

export interface TokenProb {
  surface: string;
  token_id: number;
  prob: number;
  cond_prob?: number;
  uncond_prob?: number;
}

export interface Reference {
  record_id: string;
  caption: string;
  keywords: string[];
  similarity: number;
  matched_feature: string;
}

export interface EntropyReport {
  per_step_entropy: number[];
  pe: number;
  normalized_pe: number;
  seq_logprob_mean: number | null;
}

export interface GuidanceParams {
  alpha: number;
  beta: number;
  gamma: number;
}

export interface ReviewItem {
  item_id: string;
  question: string;
  visual_ref: Record<string, unknown> | null;
  initial_answer: string | null;
  initial_token_probs: TokenProb[];
  entropy: EntropyReport | null;
  references: Reference[];
  status: ItemStatus;
  annotation: Record<string, unknown> | null;
  mask_preview: number[] | null;
  regenerated_answer: string | null;
  regenerated_token_probs: TokenProb[] | null;
  guidance_config: (GuidanceParams & { delta: number }) | null;
}

/** Character span [start, end) into a reference text. */
export interface Span {
  start: number;
  end: number;
}
