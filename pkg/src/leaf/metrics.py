"""Evaluation metrics and runners: exact match, token F1, unigram BLEU with
brevity penalty (sentence- and corpus-level), and loss reporting.

EM/F1 follow the standard extractive-QA scorer; BLEU1 per distractor slot is
aggregated corpus-level (sum of clipped counts over sum of candidate lengths,
brevity penalty from corpus lengths). Metric values are stored as fractions in
[0, 1]; serialized reports also carry a x100 view.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from . import seqformat
from .corpus import TASK_DISTRACTOR, TASK_QG, DistractorRecord, QARecord
from .textmodel.base import DecodeParams

logger = logging.getLogger(__name__)

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


def normalize_text(s: str) -> str:
    """Lowercase, strip punctuation, strip articles, collapse whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES_RE.sub(" ", s)
    return " ".join(s.split())


def exact_match(prediction: str, gold: str) -> int:
    return int(normalize_text(prediction) == normalize_text(gold))


def f1_token(prediction: str, gold: str) -> float:
    """Harmonic mean of precision/recall over normalized token multisets."""
    pred_tokens = normalize_text(prediction).split()
    gold_tokens = normalize_text(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def _clipped_unigram_overlap(cand: list[str], refs: list[list[str]]) -> int:
    cand_counts = Counter(cand)
    max_ref: Counter = Counter()
    for ref in refs:
        for token, n in Counter(ref).items():
            if n > max_ref[token]:
                max_ref[token] = n
    return sum(min(n, max_ref[token]) for token, n in cand_counts.items())


def _closest_ref_len(cand_len: int, ref_lens: list[int]) -> int:
    return min(ref_lens, key=lambda rl: (abs(rl - cand_len), rl))


def bleu1(candidate: str, references: Sequence[str]) -> float:
    """Clipped unigram precision times brevity penalty, whitespace tokens."""
    if not references:
        raise ValueError("at least one reference is required")
    cand = candidate.split()
    refs = [r.split() for r in references]
    if not cand:
        return 0.0
    precision = _clipped_unigram_overlap(cand, refs) / len(cand)
    ref_len = _closest_ref_len(len(cand), [len(r) for r in refs])
    bp = 1.0 if len(cand) >= ref_len else math.exp(1.0 - ref_len / len(cand))
    return precision * bp


def corpus_bleu1(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Corpus-level BLEU1: pooled clipped counts and corpus-length brevity penalty."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references must have equal length")
    total_clipped = total_cand = total_ref = 0
    for cand_text, refs_text in zip(candidates, references):
        if not refs_text:
            raise ValueError("every candidate needs at least one reference")
        cand = cand_text.split()
        refs = [r.split() for r in refs_text]
        total_ref += _closest_ref_len(len(cand), [len(r) for r in refs])
        if cand:
            total_cand += len(cand)
            total_clipped += _clipped_unigram_overlap(cand, refs)
    if total_cand == 0:
        return 0.0
    precision = total_clipped / total_cand
    bp = 1.0 if total_cand >= total_ref else math.exp(1.0 - total_ref / total_cand)
    return precision * bp


@dataclass
class EvalReport:
    """Metric bundle for one evaluation run.

    ``metrics`` values are fractions in [0, 1] except ``cross_entropy``
    (nats per token, >= 0). ``counts`` carries integer tallies such as parse
    failures; ``provenance`` records the choices behind the numbers (split,
    aggregation mode, decoding).
    """

    task: str
    split_name: str
    metrics: dict[str, float]
    n_examples: int
    config_fingerprint: str
    counts: dict[str, int] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def metrics_pct(self) -> dict[str, float]:
        """The [0,1] metrics scaled x100, matching the usual presentation."""
        return {
            k: round(v * 100.0, 2)
            for k, v in self.metrics.items()
            if k != "cross_entropy"
        }

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "split_name": self.split_name,
            "metrics": self.metrics,
            "metrics_pct": self.metrics_pct(),
            "n_examples": self.n_examples,
            "config_fingerprint": self.config_fingerprint,
            "counts": self.counts,
            "provenance": self.provenance,
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(
            task=d["task"],
            split_name=d["split_name"],
            metrics=d["metrics"],
            n_examples=d["n_examples"],
            config_fingerprint=d["config_fingerprint"],
            counts=d.get("counts", {}),
            provenance=d.get("provenance", {}),
        )


def config_fingerprint(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _decode_top(model, source: str, params: DecodeParams) -> str | None:
    candidates = model.generate(source, params)
    if not candidates:
        return None
    return candidates[0].text


def _check_task(model, expected: str) -> None:
    task = getattr(model, "task", None)
    if task is not None and task != expected:
        raise ValueError(f"model is a {task!r} handle, expected {expected!r}")


def evaluate_answer_generation(
    model,
    dev: Sequence[QARecord],
    params: DecodeParams | None = None,
    split_name: str = "dev",
) -> EvalReport:
    """Score answer generation: decode each record with a masked source and
    compare the parsed answer field against gold with EM / token F1.

    Unparseable decodes score 0 on both metrics and are tallied.
    """
    _check_task(model, TASK_QG)
    params = params or DecodeParams()
    em_total = 0.0
    f1_total = 0.0
    parse_failures = 0
    for record in dev:
        source = seqformat.format_qg_source(record.context, None)
        decoded = _decode_top(model, source, params)
        parsed = seqformat.parse_qa_target(decoded) if decoded is not None else None
        if parsed is None:
            parse_failures += 1
            continue
        _, answer = parsed
        em_total += exact_match(answer, record.answer)
        f1_total += f1_token(answer, record.answer)
    n = len(dev)
    return EvalReport(
        task=TASK_QG,
        split_name=split_name,
        metrics={
            "exact_match": em_total / n if n else 0.0,
            "f1": f1_total / n if n else 0.0,
        },
        n_examples=n,
        config_fingerprint=config_fingerprint(
            {"task": TASK_QG, "mode": "answer_generation", "decode": vars(params)}
        ),
        counts={"parse_failures": parse_failures},
        provenance={"split_name": split_name, "decode_strategy": params.strategy},
    )


def evaluate_distractors(
    model,
    test: Sequence[DistractorRecord],
    params: DecodeParams | None = None,
    split_name: str = "test",
) -> EvalReport:
    """Score distractor generation: corpus BLEU1 of predicted slot i against
    gold slot i, for the three slots. Missing predicted slots count as empty.
    """
    _check_task(model, TASK_DISTRACTOR)
    params = params or DecodeParams()
    slot_candidates: list[list[str]] = [[], [], []]
    slot_references: list[list[list[str]]] = [[], [], []]
    for record in test:
        source = seqformat.format_distractor_source(record.question, record.answer, record.context)
        decoded = _decode_top(model, source, params)
        predicted = seqformat.parse_distractor_target(decoded) if decoded else []
        for slot in range(3):
            slot_candidates[slot].append(predicted[slot] if slot < len(predicted) else "")
            slot_references[slot].append([record.distractors[slot]])
    metrics = {
        f"bleu1_slot{slot + 1}": corpus_bleu1(slot_candidates[slot], slot_references[slot])
        for slot in range(3)
    }
    return EvalReport(
        task=TASK_DISTRACTOR,
        split_name=split_name,
        metrics=metrics,
        n_examples=len(test),
        config_fingerprint=config_fingerprint(
            {"task": TASK_DISTRACTOR, "mode": "distractor_slots", "decode": vars(params)}
        ),
        provenance={
            "split_name": split_name,
            "bleu_aggregation": "corpus",
            "decode_strategy": params.strategy,
        },
    )


def report_loss(model, examples, split_name: str = "dev") -> EvalReport:
    """Wrap a dataset cross-entropy evaluation in an EvalReport."""
    loss = model.evaluate_loss(examples)
    return EvalReport(
        task=getattr(model, "task", "unknown"),
        split_name=split_name,
        metrics={"cross_entropy": loss},
        n_examples=len(examples),
        config_fingerprint=config_fingerprint({"mode": "loss", "split": split_name}),
        provenance={"split_name": split_name},
    )
