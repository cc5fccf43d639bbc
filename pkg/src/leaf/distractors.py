"""Distractor assembly: parse the model's [SEP]-joined triple, drop
duplicates and answer echoes, and fill shortfalls from a phrase-embedding
nearest-neighbor store (context-independent proposals).
"""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .seqformat import format_distractor_source, parse_distractor_target

__all__ = [
    "Distractor",
    "DistractorSet",
    "SemanticNeighborIndex",
    "assemble_distractors",
    "format_distractor_source",
    "normalize_option",
    "parse_distractor_target",
    "semantic_neighbors",
]

logger = logging.getLogger(__name__)

ORIGIN_MODEL = "model"
ORIGIN_SEMANTIC = "semantic"

_STRIP_CHARS = string.punctuation + string.whitespace


def normalize_option(s: str) -> str:
    """Comparison key: lowercase, collapse whitespace, strip surrounding punctuation."""
    return " ".join(s.lower().split()).strip(_STRIP_CHARS)


@dataclass
class Distractor:
    text: str
    origin: str
    similarity: float | None = None


@dataclass
class DistractorSet:
    distractors: list[Distractor]
    shortfall: int = 0


class SemanticNeighborIndex:
    """Nearest-neighbor store over sense-tagged phrase embeddings.

    Keys use the ``phrase|SENSE`` convention (underscores in stored phrases
    are read as spaces); vectors are L2-normalized on load. Similarities are
    cosine clamped to [0, 1].
    """

    def __init__(self, keys: Sequence[str], vectors: np.ndarray):
        if len(keys) != len(vectors):
            raise ValueError("keys and vectors must have equal length")
        self.phrases: list[str] = []
        self.senses: list[str | None] = []
        for key in keys:
            phrase, _, sense = key.partition("|")
            self.phrases.append(phrase.replace("_", " "))
            self.senses.append(sense or None)
        vectors = np.asarray(vectors, dtype=np.float32)
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        self._vectors = vectors / norms
        self._by_norm: dict[str, list[int]] = {}
        for i, phrase in enumerate(self.phrases):
            self._by_norm.setdefault(normalize_option(phrase), []).append(i)

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[str, str | None, Sequence[float]]]):
        keys, vectors = [], []
        for phrase, sense, vector in entries:
            keys.append(f"{phrase}|{sense}" if sense else phrase)
            vectors.append(vector)
        return cls(keys, np.asarray(vectors, dtype=np.float32))

    @classmethod
    def load(cls, path) -> "SemanticNeighborIndex":
        path = Path(path)
        if path.suffix == ".jsonl":
            keys, vectors = [], []
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    row = json.loads(line)
                    keys.append(row["key"])
                    vectors.append(row["vector"])
            return cls(keys, np.asarray(vectors, dtype=np.float32))
        data = np.load(path, allow_pickle=False)
        return cls([str(k) for k in data["keys"]], data["vectors"])

    def save(self, path) -> None:
        keys = [
            f"{p.replace(' ', '_')}|{s}" if s else p.replace(" ", "_")
            for p, s in zip(self.phrases, self.senses)
        ]
        np.savez(path, keys=np.asarray(keys), vectors=self._vectors)

    @property
    def vocabulary(self) -> set[str]:
        return set(self.phrases)

    def __len__(self) -> int:
        return len(self.phrases)

    def _lookup(self, phrase: str) -> int | None:
        hits = self._by_norm.get(normalize_option(phrase))
        return hits[0] if hits else None

    def neighbors(
        self,
        answer: str,
        k: int,
        min_similarity: float = 0.0,
        match_sense: bool = False,
    ) -> list[Distractor]:
        """Up to k nearest phrases by similarity, excluding the answer itself.

        Unknown answers return an empty list. ``match_sense`` keeps only
        neighbors whose sense tag equals the answer's (when both are tagged).
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        anchor = self._lookup(answer)
        if anchor is None:
            return []
        answer_norm = normalize_option(answer)
        anchor_sense = self.senses[anchor]
        sims = np.clip(self._vectors @ self._vectors[anchor], 0.0, 1.0)
        out: list[Distractor] = []
        for j in np.argsort(-sims, kind="stable"):
            sim = float(sims[j])
            if sim < min_similarity:
                break
            if j == anchor or normalize_option(self.phrases[j]) == answer_norm:
                continue
            if match_sense and anchor_sense and self.senses[j] and self.senses[j] != anchor_sense:
                continue
            out.append(Distractor(self.phrases[j], ORIGIN_SEMANTIC, similarity=sim))
            if len(out) == k:
                break
        return out


def semantic_neighbors(
    index: SemanticNeighborIndex,
    answer: str,
    k: int,
    min_similarity: float = 0.0,
    match_sense: bool = False,
) -> list[Distractor]:
    return index.neighbors(answer, k, min_similarity=min_similarity, match_sense=match_sense)


_DEMO_GROUPS: dict[str, list[list[str]]] = {
    "NOUN": [
        ["oxygen", "hydrogen", "nitrogen", "carbon", "helium"],
        ["photosynthesis", "respiration", "evaporation", "condensation"],
        ["mitochondria", "nucleus", "ribosome", "membrane"],
        ["atmosphere", "crust", "mantle", "core"],
    ],
    "GPE": [["Paris", "London", "Vienna", "Berlin", "Madrid"]],
    "PERSON": [["Einstein", "Newton", "Darwin", "Curie"]],
    "DATE": [["1886", "1905", "1912", "1945"]],
    "CARDINAL": [["three", "four", "five", "seven"]],
}


def demo_semantic_index(dim: int = 16) -> SemanticNeighborIndex:
    """Small deterministic index for stub mode: vectors cluster by topic so
    same-group phrases sit above the usual similarity floor."""
    rng = np.random.default_rng(0)
    entries = []
    for sense, groups in _DEMO_GROUPS.items():
        for group in groups:
            base = rng.normal(size=dim)
            base /= np.linalg.norm(base)
            for phrase in group:
                entries.append((phrase, sense, base + 0.15 * rng.normal(size=dim)))
    return SemanticNeighborIndex.from_entries(entries)


def assemble_distractors(
    model_cands: Sequence[str],
    fallback: SemanticNeighborIndex | None,
    answer: str,
    k: int = 3,
    *,
    min_similarity: float = 0.5,
    match_sense: bool = True,
) -> DistractorSet:
    """Keep up to k valid model candidates in order, then fill from the
    semantic store.

    A candidate is dropped when it normalizes to the answer, to an already
    kept distractor, or to nothing. Model-origin distractors always precede
    semantic ones; the semantic fill applies the similarity floor and sense
    filter. The shortfall below k is reported alongside the list.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    seen = {normalize_option(answer)}
    kept: list[Distractor] = []
    for cand in model_cands:
        text = cand.strip()
        key = normalize_option(text)
        if not text or not key or key in seen:
            continue
        kept.append(Distractor(text, ORIGIN_MODEL))
        seen.add(key)
        if len(kept) == k:
            break
    if len(kept) < k and fallback is not None and len(fallback) > 0:
        pool = fallback.neighbors(
            answer,
            k=k - len(kept) + len(seen) + 8,
            min_similarity=min_similarity,
            match_sense=match_sense,
        )
        for neighbor in pool:
            key = normalize_option(neighbor.text)
            if not key or key in seen:
                continue
            kept.append(neighbor)
            seen.add(key)
            if len(kept) == k:
                break
    return DistractorSet(kept, shortfall=k - len(kept))
