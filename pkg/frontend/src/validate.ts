// Client-side mirror of the server's item rules, so invalid edits are caught
// before an export round trip.

import type { EditableQuestion } from "./state";

// ASCII punctuation + whitespace, matching the server's normalization.
const STRIP_CHARS = new Set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~ \t\n\r");

/** Comparison key: lowercase, collapse whitespace, strip surrounding punctuation. */
export function normalizeOption(s: string): string {
  const collapsed = s.toLowerCase().split(/\s+/).filter(Boolean).join(" ");
  let start = 0;
  let end = collapsed.length;
  while (start < end && STRIP_CHARS.has(collapsed[start])) start += 1;
  while (end > start && STRIP_CHARS.has(collapsed[end - 1])) end -= 1;
  return collapsed.slice(start, end);
}

/** First rule violation for an item, or null when it is exportable. */
export function itemError(item: EditableQuestion): string | null {
  if (!item.question.trim()) return "The question must not be empty.";
  if (!item.answer.trim()) return "The answer must not be empty.";
  const answerKey = normalizeOption(item.answer);
  const seen = new Set<string>();
  for (let i = 0; i < item.distractors.length; i += 1) {
    const text = item.distractors[i].text;
    const key = normalizeOption(text);
    if (!key) return `Distractor ${i + 1} must not be empty.`;
    if (key === answerKey) return `Distractor ${i + 1} equals the answer.`;
    if (seen.has(key)) return `Distractor ${i + 1} duplicates another distractor.`;
    seen.add(key);
  }
  return null;
}

export function validateRequest(text: string, count: number): string | null {
  if (!text.trim()) return "Paste some educational text first.";
  if (text.length > 100_000) return "The text is too long (limit 100,000 characters).";
  if (!Number.isInteger(count) || count < 1 || count > 50)
    return "The question count must be a whole number between 1 and 50.";
  return null;
}
