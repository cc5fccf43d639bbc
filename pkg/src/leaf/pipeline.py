"""MCQ generator: pre-process instructor text into passages, run QA pair
generation and distractor assembly, and produce finished items.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from . import seqformat
from .distractors import Distractor, SemanticNeighborIndex, assemble_distractors
from .errors import EmptyInputError, GenerationError
from .qag import generate_qa_pairs
from .textmodel.base import DecodeParams

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_TOKENS = 250  # leaves headroom inside the 300-token qg source budget
DEFAULT_OVERLAP_SENTENCES = 1

_BOUNDARY_RE = re.compile(r"(?<=[.!?])([\"'”’)\]]*)(\s+)")
_TOKEN_RE = re.compile(r"\S+")


@dataclass
class Passage:
    index: int
    text: str
    char_span: tuple[int, int]


@dataclass
class MCQItem:
    question: str
    answer: str
    distractors: list[Distractor]
    passage_index: int
    shortfall: int = 0

    def to_wire(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "distractors": [
                {"text": d.text, "origin": d.origin, "similarity": d.similarity}
                for d in self.distractors
            ],
            "passage_index": self.passage_index,
            "shortfall": self.shortfall,
        }


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Spans of sentences in the original text, whitespace-trimmed."""
    boundaries = [0]
    for match in _BOUNDARY_RE.finditer(text):
        boundaries.append(match.end(1))
        boundaries.append(match.end(2))
    boundaries.append(len(text))
    spans = []
    for start, end in zip(boundaries[::2], boundaries[1::2]):
        while start < end and text[start].isspace():
            start += 1
        while end > start and text[end - 1].isspace():
            end -= 1
        if end > start:
            spans.append((start, end))
    return spans


def chunk_text(
    text: str,
    max_tokens: int = DEFAULT_CHUNK_TOKENS,
    overlap_sentences: int = DEFAULT_OVERLAP_SENTENCES,
) -> list[Passage]:
    """Split text into sentence-boundary passages of at most ``max_tokens``
    whitespace tokens, consecutive passages sharing ``overlap_sentences``
    sentences. Every sentence lands in at least one passage; a single
    sentence longer than the budget becomes its own truncated passage.
    """
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
    if overlap_sentences < 0:
        raise ValueError(f"overlap_sentences must be >= 0, got {overlap_sentences}")
    spans = sentence_spans(text)
    if not spans:
        raise EmptyInputError("text contains no sentences")
    token_counts = [len(_TOKEN_RE.findall(text[s:e])) for s, e in spans]

    passages: list[Passage] = []
    i = 0
    while i < len(spans):
        j, total = i, 0
        while j < len(spans) and total + token_counts[j] <= max_tokens:
            total += token_counts[j]
            j += 1
        if j == i:
            # oversized sentence: keep its first max_tokens tokens
            start, end = spans[i]
            tokens = list(_TOKEN_RE.finditer(text, start, end))
            cut = tokens[max_tokens - 1].end()
            logger.warning(
                "sentence of %d tokens exceeds the %d-token budget; truncating",
                token_counts[i], max_tokens,
            )
            passages.append(Passage(len(passages), text[start:cut], (start, cut)))
            i += 1
            continue
        start, end = spans[i][0], spans[j - 1][1]
        passages.append(Passage(len(passages), text[start:end], (start, end)))
        if j >= len(spans):
            break
        i = max(i + 1, j - overlap_sentences)
    return passages


def generate_mcqs(
    models: dict,
    fallback_index: SemanticNeighborIndex | None,
    text: str,
    count: int,
    k: int = 3,
    *,
    params: DecodeParams | None = None,
    max_tokens: int = DEFAULT_CHUNK_TOKENS,
    overlap_sentences: int = DEFAULT_OVERLAP_SENTENCES,
    use_semantic_fallback: bool = True,
    min_similarity: float = 0.5,
) -> list[MCQItem]:
    """Produce up to ``count`` finished MCQs from instructor text.

    Items with zero surviving distractors are dropped. The result is ordered
    by passage, then by candidate score, and is deterministic for fixed model
    outputs.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    params = params or DecodeParams()
    passages = chunk_text(text, max_tokens, overlap_sentences)
    pairs = generate_qa_pairs(models["qg"], [p.text for p in passages], count, params)

    assembled = []
    fallback = fallback_index if use_semantic_fallback else None
    for pair in pairs:
        source = seqformat.format_distractor_source(
            pair.question, pair.answer, passages[pair.source_passage_index].text
        )
        try:
            candidates = models["distractor"].generate(source, params)
        except Exception as exc:
            raise GenerationError(pair.source_passage_index, str(exc)) from exc
        model_strings = seqformat.parse_distractor_target(candidates[0].text) if candidates else []
        result = assemble_distractors(
            model_strings, fallback, pair.answer, k, min_similarity=min_similarity
        )
        if not result.distractors:
            logger.info("dropping item with no valid distractors: %r", pair.question)
            continue
        assembled.append((pair, result))

    assembled.sort(key=lambda t: (t[0].source_passage_index, -t[0].score))
    return [
        MCQItem(
            question=pair.question,
            answer=pair.answer,
            distractors=result.distractors,
            passage_index=pair.source_passage_index,
            shortfall=result.shortfall,
        )
        for pair, result in assembled
    ]
