"""Question-answer pair generation over the trained multi-task model.

Sources are formatted with the ``[MASK]`` answer slot, candidates come back
as keyed text, and only parseable, deduplicated pairs survive.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass
from typing import Sequence

from . import seqformat
from .errors import GenerationError
from .seqformat import parse_qa_target
from .textmodel.base import Candidate, DecodeParams

__all__ = ["QAPair", "format_qg_source", "parse_qa_target", "generate_qa_pairs"]

logger = logging.getLogger(__name__)


@dataclass
class QAPair:
    question: str
    answer: str
    source_passage_index: int
    score: float


def format_qg_source(passage: str, answer: str | None = None,
                     max_source_tokens: int | None = None) -> str:
    """Keyed source serialization; an absent answer becomes the ``[MASK]`` slot."""
    if not passage.strip():
        raise ValueError("passage must be non-empty")
    return seqformat.format_qg_source(passage, answer, max_source_tokens)


def normalize_question(question: str) -> str:
    """Comparison key: lowercase, collapse whitespace, strip terminal punctuation."""
    collapsed = " ".join(question.lower().split())
    return collapsed.rstrip(string.punctuation + " ")


def _finalize_question(question: str) -> str:
    question = question.strip()
    if not question.endswith("?"):
        question += "?"
    return question


def generate_qa_pairs(
    model,
    passages: Sequence[str],
    requested: int,
    params: DecodeParams | None = None,
) -> list[QAPair]:
    """Collect up to ``requested`` distinct QA pairs from the passages.

    Passages are visited round-robin in order, taking each passage's
    candidates by beam rank; unparseable candidates are skipped and questions
    deduplicated under normalized comparison. Returns fewer than requested
    only when candidates are exhausted.
    """
    if requested < 1:
        raise ValueError(f"requested must be >= 1, got {requested}")
    if not passages:
        raise ValueError("passages must be non-empty")
    params = params or DecodeParams()

    candidates: dict[int, list[Candidate]] = {}
    pairs: list[QAPair] = []
    seen_questions: set[str] = set()
    for rank in range(params.width):
        exhausted = True
        for index, passage in enumerate(passages):
            if len(pairs) >= requested:
                break
            if index not in candidates:
                try:
                    candidates[index] = model.generate(format_qg_source(passage, None), params)
                except Exception as exc:
                    raise GenerationError(index, str(exc)) from exc
            ranked = candidates[index]
            if rank >= len(ranked):
                continue
            exhausted = False
            parsed = parse_qa_target(ranked[rank].text)
            if parsed is None:
                continue
            question, answer = parsed
            question = _finalize_question(question)
            if not question.strip("?").strip() or not answer.strip():
                continue
            key = normalize_question(question)
            if key in seen_questions:
                continue
            seen_questions.add(key)
            pairs.append(
                QAPair(
                    question=question,
                    answer=answer.strip(),
                    source_passage_index=index,
                    score=ranked[rank].score,
                )
            )
        if len(pairs) >= requested or exhausted:
            break
    if len(pairs) < requested:
        logger.info("qa generation shortfall: %d of %d pairs", len(pairs), requested)
    return pairs
