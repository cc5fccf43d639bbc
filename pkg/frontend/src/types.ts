// Wire types mirroring the service's JSON contract.

export type DistractorOrigin = "model" | "semantic";

export interface WireDistractor {
  text: string;
  origin: DistractorOrigin;
  similarity: number | null;
}

export interface WireMCQItem {
  question: string;
  answer: string;
  distractors: WireDistractor[];
  passage_index: number;
  shortfall: number;
}

export interface GenerateResponse {
  items: WireMCQItem[];
  partial: boolean;
  warnings: string[];
  request_id: string;
}

export interface HealthResponse {
  status: string;
  models: { qg: boolean; distractor: boolean };
  version: string;
}

export type ExportFormat = "json" | "gift";

export interface ExportResult {
  content: string;
  filename: string;
  mediaType: string;
}
