"""Text serialization shared by the data pipelines and the generators.

Both tasks move structured fields through plain text, so the encoding has to
be exactly invertible:

  qg source:          ``context: {context} answer: {answer-or-[MASK]}``
  qg target:          ``question: {question} answer: {answer}``
  distractor source:  ``question: {question} answer: {answer} context: {context}``
  distractor target:  ``d1 [SEP] d2 [SEP] d3``

``[MASK]`` and ``[SEP]`` are atomic sentinels. Occurrences of the sentinels,
of the key markers (``question:`` etc.) and of backslashes inside field text
are backslash-escaped before serialization and unescaped on parse, which makes
format -> parse an exact round trip for any stripped field text.
"""

from __future__ import annotations

import logging
import re

logger = logging.getLogger(__name__)

MASK = "[MASK]"
SEP = "[SEP]"

QG_SOURCE_KEYS = ("context:", "answer:")
QG_TARGET_KEYS = ("question:", "answer:")
DISTRACTOR_SOURCE_KEYS = ("question:", "answer:", "context:")

_KEY_MARKERS = ("question:", "answer:", "context:")
_UNESCAPE_RE = re.compile(r"\\(.)", re.DOTALL)


def escape(text: str) -> str:
    """Escape backslashes, sentinels and key markers in field text."""
    out = text.replace("\\", "\\\\")
    out = out.replace(MASK, "\\[MASK\\]")
    out = out.replace(SEP, "\\[SEP\\]")
    for key in _KEY_MARKERS:
        out = out.replace(key, key[:-1] + "\\:")
    return out


def unescape(text: str) -> str:
    """Invert :func:`escape` in a single left-to-right pass."""
    return _UNESCAPE_RE.sub(r"\1", text)


def fit_context(context: str, reserved_tokens: int, limit: int | None) -> tuple[str, bool]:
    """Head-truncate ``context`` so the full serialization fits ``limit`` tokens.

    Only the context is ever truncated; the first ``limit - reserved_tokens``
    whitespace tokens are kept (at least one). Returns the possibly-truncated
    text and whether truncation happened.
    """
    if limit is None:
        return context, False
    budget = max(1, limit - reserved_tokens)
    tokens = context.split()
    if len(tokens) <= budget:
        return context, False
    logger.debug("context truncated from %d to %d tokens", len(tokens), budget)
    return " ".join(tokens[:budget]), True


def count_tokens(text: str) -> int:
    return len(text.split())


def format_qg_source(context: str, answer: str | None, max_source_tokens: int | None = None) -> str:
    """Serialize a qg-task source; ``answer=None`` emits the ``[MASK]`` slot."""
    slot = MASK if answer is None else escape(answer.strip())
    reserved = len(QG_SOURCE_KEYS) + count_tokens(slot)
    context, _ = fit_context(context.strip(), reserved, max_source_tokens)
    return f"context: {escape(context)} answer: {slot}"


def format_qg_target(question: str, answer: str) -> str:
    return f"question: {escape(question.strip())} answer: {escape(answer.strip())}"


def format_distractor_source(
    question: str, answer: str, context: str, max_source_tokens: int | None = None
) -> str:
    question = escape(question.strip())
    answer = escape(answer.strip())
    reserved = len(DISTRACTOR_SOURCE_KEYS) + count_tokens(question) + count_tokens(answer)
    context, _ = fit_context(context.strip(), reserved, max_source_tokens)
    return f"question: {question} answer: {answer} context: {escape(context)}"


def join_distractor_target(distractors: list[str]) -> str:
    return f" {SEP} ".join(escape(d.strip()) for d in distractors)


def _split_keyed(text: str, keys: tuple[str, ...]) -> list[str] | None:
    """Split ``text`` into the fields named by ``keys``, in order.

    Escaped field text never contains a raw key marker, so the first
    occurrence of each subsequent key is the genuine field boundary. Returns
    None when a key is missing or a field is empty (parse failure, not an
    error: decoded model output is untrusted).
    """
    s = text.strip()
    start = s.find(keys[0])
    if start == -1:
        return None
    cursor = start + len(keys[0])
    raw_fields = []
    for nxt in keys[1:]:
        idx = s.find(nxt, cursor)
        if idx == -1:
            return None
        raw_fields.append(s[cursor:idx])
        cursor = idx + len(nxt)
    raw_fields.append(s[cursor:])
    fields = [f.strip() for f in raw_fields]
    if any(not f for f in fields):
        return None
    return fields


def parse_qa_target(decoded: str) -> tuple[str, str] | None:
    """Extract (question, answer) from decoded text, or None on failure."""
    fields = _split_keyed(decoded, QG_TARGET_KEYS)
    if fields is None:
        return None
    return unescape(fields[0]), unescape(fields[1])


def parse_qg_source(source: str) -> tuple[str, str | None] | None:
    """Inverse of :func:`format_qg_source`; the answer is None for a masked slot."""
    fields = _split_keyed(source, QG_SOURCE_KEYS)
    if fields is None:
        return None
    context = unescape(fields[0])
    if fields[1] == MASK:
        return context, None
    return context, unescape(fields[1])


def parse_distractor_source(source: str) -> tuple[str, str, str] | None:
    fields = _split_keyed(source, DISTRACTOR_SOURCE_KEYS)
    if fields is None:
        return None
    return unescape(fields[0]), unescape(fields[1]), unescape(fields[2])


def parse_distractor_target(decoded: str) -> list[str]:
    """Split decoded text on unescaped ``[SEP]``, trim, and drop empties.

    Model output is untrusted: the result may hold fewer or more than three
    strings.
    """
    out = []
    for segment in decoded.split(SEP):
        segment = segment.strip()
        if segment:
            out.append(unescape(segment))
    return out
