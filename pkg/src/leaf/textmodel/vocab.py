"""Whitespace word vocabulary for the self-contained transformer backend.

The sentinels ``[MASK]`` and ``[SEP]`` are registered as atomic vocabulary
items so they survive tokenize/detokenize round trips.
"""

from __future__ import annotations

import json
from collections import Counter
from typing import Iterable

from ..seqformat import MASK, SEP

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK, MASK, SEP)


class WordVocab:
    def __init__(self, tokens: list[str]):
        if list(tokens[: len(SPECIALS)]) != list(SPECIALS):
            raise ValueError("vocabulary must start with the special tokens")
        self._tokens = list(tokens)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}

    @classmethod
    def build(cls, texts: Iterable[str], max_size: int | None = None) -> "WordVocab":
        """Build from whitespace tokens, most frequent first (ties lexicographic)."""
        counts: Counter = Counter()
        for text in texts:
            counts.update(text.split())
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        tokens = list(SPECIALS)
        budget = None if max_size is None else max(0, max_size - len(tokens))
        for token, _ in ordered:
            if token in SPECIALS:
                continue
            if budget is not None and len(tokens) - len(SPECIALS) >= budget:
                break
            tokens.append(token)
        return cls(tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    @property
    def unk_id(self) -> int:
        return 3

    def encode(self, text: str, limit: int | None = None, add_eos: bool = False) -> list[int]:
        ids = [self._ids.get(tok, self.unk_id) for tok in text.split()]
        if limit is not None:
            keep = limit - 1 if add_eos else limit
            ids = ids[: max(1, keep)]
        if add_eos:
            ids.append(self.eos_id)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        """Join tokens, stopping at EOS and skipping PAD/BOS."""
        out = []
        for i in ids:
            if i == self.eos_id:
                break
            if i in (self.pad_id, self.bos_id):
                continue
            out.append(self._tokens[i])
        return " ".join(out)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self._tokens, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "WordVocab":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))
