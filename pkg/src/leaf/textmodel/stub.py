"""Scripted model double used by the pipeline/service tests and by stub mode.

Implements the same generate/evaluate_loss surface as a trained handle.
Sources found in the script return their scripted candidates; anything else
falls back to a deterministic template derived from the source text, so a
stub-backed pipeline always produces well-formed output.
"""

from __future__ import annotations

import re

from .. import seqformat
from .base import Candidate, DecodeParams, TASK_DISTRACTOR, TASK_QG

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9'-]{2,}")

_FILLER_WORDS = ("process", "material", "period", "region")


def _content_words(text: str) -> list[str]:
    """Distinct words of >= 3 letters, in order of first appearance."""
    seen = set()
    words = []
    for match in _WORD_RE.finditer(text):
        word = match.group(0)
        key = word.lower()
        if key not in seen:
            seen.add(key)
            words.append(word)
    return words


class StubModel:
    """Test double: scripted source -> candidates lookup with a template fallback."""

    def __init__(self, task: str, scripted: dict | None = None, loss: float = 0.0):
        if task not in (TASK_QG, TASK_DISTRACTOR):
            raise ValueError(f"unknown task {task!r}")
        self.task = task
        self.scripted = dict(scripted or {})
        self._loss = loss

    def generate(self, source: str, params: DecodeParams) -> list[Candidate]:
        params.validate()
        if not source:
            raise ValueError("source must be non-empty")
        outputs = self.scripted.get(source)
        if outputs is None:
            outputs = self._fallback(source, params.width)
        candidates = []
        for rank, item in enumerate(outputs[: params.width]):
            if isinstance(item, tuple):
                text, score = item
            else:
                text, score = item, -float(rank)
            candidates.append(Candidate(text=text, score=score))
        candidates.sort(key=lambda c: c.score, reverse=True)
        return candidates

    def evaluate_loss(self, examples) -> float:
        if not examples:
            raise ValueError("examples must be non-empty")
        return self._loss

    def _fallback(self, source: str, width: int) -> list[str]:
        if self.task == TASK_QG:
            parsed = seqformat.parse_qg_source(source)
            context = parsed[0] if parsed else source
            words = _content_words(context) or ["this"]
            outputs = []
            for rank in range(width):
                word = words[rank % len(words)]
                outputs.append(
                    f"question: What does the text say about {word}? answer: {word}"
                )
            return outputs
        parsed = seqformat.parse_distractor_source(source)
        if parsed:
            _, answer, context = parsed
        else:
            answer, context = "", source
        pool = [w for w in _content_words(context) if w.lower() != answer.lower()]
        seen = {w.lower() for w in pool}
        pool.extend(
            w for w in _FILLER_WORDS if w.lower() != answer.lower() and w.lower() not in seen
        )
        outputs = []
        for rank in range(width):
            triple = [pool[(rank + i) % len(pool)] for i in range(3)]
            outputs.append(seqformat.join_distractor_target(triple))
        return outputs
