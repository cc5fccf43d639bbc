// Two-pane review app: input + request on the left, editable question cards
// on the right. All state transitions go through the pure reducer; this
// module only renders state and translates DOM events into UiEvents.

import { ApiError, NetworkError, createApiClient, type ApiClient } from "./api";
import { triggerDownload } from "./download";
import {
  exportPayload,
  exportReadiness,
  initialState,
  isDirty,
  reduce,
  type AppState,
  type UiEvent,
} from "./state";
import type { ExportFormat } from "./types";
import { itemError, validateRequest } from "./validate";

export interface AppHandle {
  dispatch(event: UiEvent): void;
  getState(): AppState;
  submitGeneration(): Promise<void>;
  exportQuiz(): Promise<void>;
}

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    switch (err.code) {
      case "empty_input":
        return "The text is too short to generate questions from.";
      case "models_not_loaded":
        return "The server has no models loaded. Start it with checkpoints or in stub mode.";
      case "timeout":
        return "Generation took too long; try a shorter text or a smaller count.";
      default:
        return err.message;
    }
  }
  if (err instanceof NetworkError) return err.message;
  return String(err);
}

const LAYOUT = `
  <div class="pane pane-input">
    <h1>leaf — quiz builder</h1>
    <label for="input-text">Educational text</label>
    <textarea id="input-text" data-testid="input-text"
      placeholder="Paste the course text here..."></textarea>
    <label for="input-count">Number of questions</label>
    <input id="input-count" data-testid="input-count" type="number"
      min="1" max="50" value="3" />
    <button id="btn-generate" data-testid="btn-generate">Generate questions</button>
    <div id="banners"></div>
  </div>
  <div class="pane pane-results">
    <div id="results" data-testid="results"></div>
    <div id="export-bar" class="export-bar" hidden>
      <label for="select-format">Format</label>
      <select id="select-format" data-testid="select-format">
        <option value="gift">GIFT</option>
        <option value="json">JSON</option>
      </select>
      <button id="btn-export" data-testid="btn-export">Export selected</button>
      <span id="export-hint" data-testid="export-hint" class="hint"></span>
    </div>
  </div>
`;

function renderBanners(state: AppState): string {
  const parts: string[] = [];
  if (state.error) {
    const retry = state.retryable
      ? ' <button data-action="retry" data-testid="btn-retry">Retry</button>'
      : "";
    parts.push(
      `<div class="banner banner-error" data-testid="banner-error">` +
        `${escapeHtml(state.error)}${retry}</div>`,
    );
  }
  if (state.partial) {
    const returned = state.questions.length;
    parts.push(
      `<div class="banner banner-warning" data-testid="banner-partial">` +
        `Returned ${returned} of ${state.requestedCount} requested questions.</div>`,
    );
  }
  for (const warning of state.warnings) {
    if (state.partial && warning.includes("requested")) continue;
    parts.push(`<div class="banner banner-warning">${escapeHtml(warning)}</div>`);
  }
  if (state.phase === "generating") {
    parts.push(`<div class="banner" data-testid="banner-busy">Generating…</div>`);
  }
  return parts.join("");
}

function renderCard(state: AppState, index: number): string {
  const q = state.questions[index];
  const error = itemError(q);
  const dirty = isDirty(q);
  const distractorRows = q.distractors
    .map((d, di) => {
      const badgeTitle =
        d.similarity == null ? "" : ` title="similarity ${d.similarity.toFixed(2)}"`;
      return (
        `<div class="option option-distractor">` +
        `<input type="text" value="${escapeHtml(d.text)}" data-field="distractor"` +
        ` data-item="${q.id}" data-index="${di}" data-testid="d-input-${index}-${di}" />` +
        `<span class="badge badge-${d.origin}" data-testid="badge-${index}-${di}"${badgeTitle}>` +
        `${d.origin}</span></div>`
      );
    })
    .join("");
  return (
    `<div class="card${q.selected ? "" : " card-deselected"}" data-testid="card-${index}">` +
    `<div class="card-head">` +
    `<label class="select-label"><input type="checkbox" data-action="select"` +
    ` data-item="${q.id}" data-testid="card-select-${index}"${q.selected ? " checked" : ""} />` +
    ` include</label>` +
    (dirty ? `<span class="chip chip-dirty" data-testid="card-dirty-${index}">edited</span>` : "") +
    (q.original.shortfall > 0
      ? `<span class="chip chip-warn">${q.original.shortfall} distractor(s) missing</span>`
      : "") +
    `</div>` +
    `<input type="text" class="question-input" value="${escapeHtml(q.question)}"` +
    ` data-field="question" data-item="${q.id}" data-testid="q-input-${index}" />` +
    `<div class="option option-answer"><span class="answer-mark">✓</span>` +
    `<input type="text" value="${escapeHtml(q.answer)}" data-field="answer"` +
    ` data-item="${q.id}" data-testid="a-input-${index}" /></div>` +
    distractorRows +
    (error
      ? `<div class="card-error" data-testid="card-error-${index}">${escapeHtml(error)}</div>`
      : "") +
    `</div>`
  );
}

export function mountApp(root: HTMLElement, api?: ApiClient): AppHandle {
  const client = api ?? createApiClient();
  let state = initialState();

  root.classList.add("app");
  root.innerHTML = LAYOUT;
  const textInput = root.querySelector<HTMLTextAreaElement>("#input-text")!;
  const countInput = root.querySelector<HTMLInputElement>("#input-count")!;
  const generateButton = root.querySelector<HTMLButtonElement>("#btn-generate")!;
  const banners = root.querySelector<HTMLElement>("#banners")!;
  const results = root.querySelector<HTMLElement>("#results")!;
  const exportBar = root.querySelector<HTMLElement>("#export-bar")!;
  const formatSelect = root.querySelector<HTMLSelectElement>("#select-format")!;
  const exportButton = root.querySelector<HTMLButtonElement>("#btn-export")!;
  const exportHint = root.querySelector<HTMLElement>("#export-hint")!;

  function render(): void {
    generateButton.disabled = state.phase === "generating";
    banners.innerHTML = renderBanners(state);
    if (state.phase === "idle" && state.questions.length === 0) {
      results.innerHTML =
        `<p class="placeholder">Generated questions appear here. ` +
        `Review, edit, select, then export.</p>`;
    } else {
      results.innerHTML = state.questions.map((_, i) => renderCard(state, i)).join("");
    }
    exportBar.hidden = state.questions.length === 0;
    formatSelect.value = state.exportFormat;
    const readiness = exportReadiness(state);
    exportButton.disabled = !readiness.enabled;
    exportHint.textContent = readiness.hint ?? "";
  }

  function dispatch(event: UiEvent): void {
    state = reduce(state, event);
    render();
  }

  async function submitGeneration(): Promise<void> {
    if (state.phase === "generating") return;
    const text = textInput.value;
    const count = Number(countInput.value);
    const problem = validateRequest(text, count);
    if (problem) {
      dispatch({ kind: "generate_failure", message: problem, retryable: false });
      return;
    }
    dispatch({ kind: "generate_start", count });
    try {
      const response = await client.generate(text, count);
      dispatch({ kind: "generate_success", response });
    } catch (err) {
      dispatch({
        kind: "generate_failure",
        message: describeError(err),
        retryable: err instanceof NetworkError,
      });
    }
  }

  async function exportQuiz(): Promise<void> {
    if (!exportReadiness(state).enabled) return;
    const items = exportPayload(state);
    const format = state.exportFormat;
    dispatch({ kind: "export_start" });
    try {
      const result = await client.exportQuiz(items, format);
      triggerDownload(result);
      dispatch({ kind: "export_done" });
    } catch (err) {
      dispatch({ kind: "export_failure", message: describeError(err) });
    }
  }

  generateButton.addEventListener("click", () => void submitGeneration());
  exportButton.addEventListener("click", () => void exportQuiz());
  formatSelect.addEventListener("change", () =>
    dispatch({ kind: "set_export_format", format: formatSelect.value as ExportFormat }),
  );
  banners.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.dataset.action === "retry") void submitGeneration();
  });
  results.addEventListener("change", (ev) => {
    const target = ev.target as HTMLInputElement;
    const item = Number(target.dataset.item);
    if (target.dataset.action === "select") {
      dispatch({ kind: "toggle_selected", item });
      return;
    }
    switch (target.dataset.field) {
      case "question":
        dispatch({ kind: "edit_question", item, value: target.value });
        break;
      case "answer":
        dispatch({ kind: "edit_answer", item, value: target.value });
        break;
      case "distractor":
        dispatch({
          kind: "edit_distractor",
          item,
          index: Number(target.dataset.index),
          value: target.value,
        });
        break;
    }
  });

  render();
  return {
    dispatch,
    getState: () => state,
    submitGeneration,
    exportQuiz,
  };
}
