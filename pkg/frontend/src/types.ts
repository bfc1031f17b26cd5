/** Wire schemas mirroring the suggestion service. */

export type SuggestKind =
  | "complete"
  | "polish"
  | "correct"
  | "infill"
  | "expand"
  | "retrieve";

export interface SuggestRequest {
  kind: SuggestKind;
  text?: string;
  span?: [number, number];
  keywords?: string[];
  n?: number;
}

export interface EditOp {
  kind: "substitute" | "insert" | "delete";
  pos: number;
  old: string | null;
  new: string | null;
  score: number;
}

export interface Candidate {
  text: string;
  score: number;
  provenance: "generated" | "retrieved";
  edits?: EditOp[] | null;
}

export interface SuggestResponse {
  candidates: Candidate[];
  model_version: string;
  latency_ms: number;
}

export interface HealthResponse {
  status: string;
  models: string[];
}
