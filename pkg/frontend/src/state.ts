// Application state as a pure function of (server response, interaction log):
// `reduce` has no side effects, so replaying the same events always rebuilds
// the same state.

import type {
  DistractorOrigin,
  ExportFormat,
  GenerateResponse,
  WireMCQItem,
} from "./types";
import { itemError } from "./validate";

export interface EditableDistractor {
  text: string;
  originalText: string;
  origin: DistractorOrigin;
  similarity: number | null;
}

export interface EditableQuestion {
  id: number;
  question: string;
  answer: string;
  distractors: EditableDistractor[];
  original: WireMCQItem;
  selected: boolean;
}

export type Phase = "idle" | "generating" | "ready" | "exporting";

export interface AppState {
  phase: Phase;
  questions: EditableQuestion[];
  requestedCount: number;
  partial: boolean;
  warnings: string[];
  error: string | null;
  retryable: boolean;
  exportFormat: ExportFormat;
}

export type UiEvent =
  | { kind: "generate_start"; count: number }
  | { kind: "generate_success"; response: GenerateResponse }
  | { kind: "generate_failure"; message: string; retryable: boolean }
  | { kind: "edit_question"; item: number; value: string }
  | { kind: "edit_answer"; item: number; value: string }
  | { kind: "edit_distractor"; item: number; index: number; value: string }
  | { kind: "toggle_selected"; item: number }
  | { kind: "set_export_format"; format: ExportFormat }
  | { kind: "export_start" }
  | { kind: "export_done" }
  | { kind: "export_failure"; message: string };

export function initialState(): AppState {
  return {
    phase: "idle",
    questions: [],
    requestedCount: 0,
    partial: false,
    warnings: [],
    error: null,
    retryable: false,
    exportFormat: "gift",
  };
}

function toEditable(item: WireMCQItem, id: number): EditableQuestion {
  return {
    id,
    question: item.question,
    answer: item.answer,
    distractors: item.distractors.map((d) => ({
      text: d.text,
      originalText: d.text,
      origin: d.origin,
      similarity: d.similarity,
    })),
    original: item,
    selected: true,
  };
}

function patchQuestion(
  state: AppState,
  id: number,
  patch: (q: EditableQuestion) => EditableQuestion,
): AppState {
  return {
    ...state,
    questions: state.questions.map((q) => (q.id === id ? patch(q) : q)),
  };
}

export function reduce(state: AppState, event: UiEvent): AppState {
  switch (event.kind) {
    case "generate_start":
      return {
        ...initialState(),
        phase: "generating",
        requestedCount: event.count,
        exportFormat: state.exportFormat,
      };
    case "generate_success":
      return {
        ...state,
        phase: "ready",
        questions: event.response.items.map(toEditable),
        partial: event.response.partial,
        warnings: event.response.warnings,
        error: null,
        retryable: false,
      };
    case "generate_failure":
      return {
        ...state,
        phase: "idle",
        error: event.message,
        retryable: event.retryable,
      };
    case "edit_question":
      return patchQuestion(state, event.item, (q) => ({ ...q, question: event.value }));
    case "edit_answer":
      return patchQuestion(state, event.item, (q) => ({ ...q, answer: event.value }));
    case "edit_distractor":
      return patchQuestion(state, event.item, (q) => ({
        ...q,
        distractors: q.distractors.map((d, i) =>
          i === event.index ? { ...d, text: event.value } : d,
        ),
      }));
    case "toggle_selected":
      return patchQuestion(state, event.item, (q) => ({ ...q, selected: !q.selected }));
    case "set_export_format":
      return { ...state, exportFormat: event.format };
    case "export_start":
      return { ...state, phase: "exporting", error: null };
    case "export_done":
      return { ...state, phase: "ready" };
    case "export_failure":
      return { ...state, phase: "ready", error: event.message, retryable: false };
  }
}

/** An item is dirty when any field differs from what the server returned. */
export function isDirty(q: EditableQuestion): boolean {
  return (
    q.question !== q.original.question ||
    q.answer !== q.original.answer ||
    q.distractors.some((d) => d.text !== d.originalText)
  );
}

export function selectedQuestions(state: AppState): EditableQuestion[] {
  return state.questions.filter((q) => q.selected);
}

/** Wire payload for export: selected items with their local edits applied. */
export function exportPayload(state: AppState): WireMCQItem[] {
  return selectedQuestions(state).map((q) => ({
    question: q.question,
    answer: q.answer,
    distractors: q.distractors.map((d) => ({
      text: d.text,
      origin: d.origin,
      similarity: d.similarity,
    })),
    passage_index: q.original.passage_index,
    shortfall: q.original.shortfall,
  }));
}

export interface ExportReadiness {
  enabled: boolean;
  hint: string | null;
}

/** Export needs >= 1 selected item and no selected item with a rule violation. */
export function exportReadiness(state: AppState): ExportReadiness {
  const selected = selectedQuestions(state);
  if (state.phase !== "ready" && state.phase !== "exporting")
    return { enabled: false, hint: null };
  if (selected.length === 0)
    return { enabled: false, hint: "Select at least one question to export." };
  const broken = selected.filter((q) => itemError(q) !== null);
  if (broken.length > 0)
    return {
      enabled: false,
      hint: `Fix or deselect ${broken.length} invalid question(s) before exporting.`,
    };
  if (state.phase === "exporting") return { enabled: false, hint: null };
  return { enabled: true, hint: null };
}
