"""Corpus ingestion: parse QA and reading-comprehension corpora and compile
them into the two task-specific example streams used for training.

The QA side reads the standard articles -> paragraphs -> qas JSON layout
(SQuAD-style); the distractor side reads RACE-style article files (4 options,
letter answer key). Compilation is deterministic: identical (corpus, seed,
limits) inputs produce byte-identical JSONL.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import seqformat
from .errors import CorpusFormatError, RecordValidationError
from .seqformat import MASK

logger = logging.getLogger(__name__)

TASK_QG = "qa_generation"
TASK_DISTRACTOR = "distractor_generation"

QG_MAX_SOURCE_TOKENS = 300
QG_MAX_TARGET_TOKENS = 80
DISTRACTOR_MAX_SOURCE_TOKENS = 512
DISTRACTOR_MAX_TARGET_TOKENS = 64

_OPTION_KEYS = "ABCD"


@dataclass
class QARecord:
    """One (context, question, first answer) triple from a QA corpus."""

    id: str
    context: str
    question: str
    answer: str
    answer_start: int | None = None

    def validate(self) -> None:
        if not self.question.strip():
            raise RecordValidationError(self.id, "question is empty")
        if not self.answer:
            raise RecordValidationError(self.id, "answer is empty")
        if self.answer_start is not None:
            end = self.answer_start + len(self.answer)
            if self.answer_start < 0 or self.context[self.answer_start:end] != self.answer:
                raise RecordValidationError(
                    self.id,
                    f"answer {self.answer!r} does not start at offset {self.answer_start}",
                )


@dataclass
class DistractorRecord:
    """One question with its answer and the three wrong options, in corpus order."""

    id: str
    context: str
    question: str
    answer: str
    distractors: list[str]

    def validate(self) -> None:
        if not self.question.strip():
            raise RecordValidationError(self.id, "question is empty")
        if not self.answer:
            raise RecordValidationError(self.id, "answer is empty")
        if len(self.distractors) != 3:
            raise RecordValidationError(
                self.id, f"expected 3 distractors, got {len(self.distractors)}"
            )
        if any(d == self.answer for d in self.distractors):
            raise RecordValidationError(self.id, "a distractor equals the answer")


@dataclass
class Seq2SeqExample:
    """One (source, target) training pair for either task."""

    source: str
    target: str
    task: str
    masked: bool = False
    id: str = ""

    def to_json(self) -> str:
        payload = {
            "source": self.source,
            "target": self.target,
            "task": self.task,
            "masked": self.masked,
            "id": self.id,
        }
        return json.dumps(payload, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "Seq2SeqExample":
        d = json.loads(line)
        return cls(
            source=d["source"],
            target=d["target"],
            task=d["task"],
            masked=bool(d.get("masked", False)),
            id=d.get("id", ""),
        )


@dataclass
class DatasetSplit:
    train: list
    dev: list
    test: list
    split_name: str

    def validate(self) -> None:
        seen: dict[str, str] = {}
        for name, part in (("train", self.train), ("dev", self.dev), ("test", self.test)):
            for record in part:
                if record.id in seen:
                    raise RecordValidationError(
                        record.id, f"appears in both {seen[record.id]} and {name}"
                    )
                seen[record.id] = name


def load_qa_corpus(path) -> list[QARecord]:
    """Parse an articles -> paragraphs -> qas corpus into QARecords.

    Keeps one record per (question, first answer) pair, in corpus order.
    Schema violations raise CorpusFormatError naming the offending field;
    a bad answer offset raises RecordValidationError with the record id.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CorpusFormatError(path, f"cannot read file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(path, f"invalid JSON: {exc}") from exc

    if not isinstance(doc, dict) or not isinstance(doc.get("data"), list):
        raise CorpusFormatError(path, "missing top-level 'data' list")

    records: list[QARecord] = []
    for ai, article in enumerate(doc["data"]):
        paragraphs = article.get("paragraphs") if isinstance(article, dict) else None
        if not isinstance(paragraphs, list):
            raise CorpusFormatError(path, f"data[{ai}]: missing 'paragraphs' list")
        for pi, para in enumerate(paragraphs):
            where = f"data[{ai}].paragraphs[{pi}]"
            if not isinstance(para, dict) or not isinstance(para.get("context"), str):
                raise CorpusFormatError(path, f"{where}: missing 'context' string")
            qas = para.get("qas")
            if not isinstance(qas, list):
                raise CorpusFormatError(path, f"{where}: missing 'qas' list")
            context = para["context"]
            for qi, qa in enumerate(qas):
                where_qa = f"{where}.qas[{qi}]"
                if not isinstance(qa, dict) or "question" not in qa or "id" not in qa:
                    raise CorpusFormatError(path, f"{where_qa}: missing 'question' or 'id'")
                answers = qa.get("answers")
                if not isinstance(answers, list) or not answers:
                    raise CorpusFormatError(path, f"{where_qa}: missing non-empty 'answers'")
                first = answers[0]
                if not isinstance(first, dict) or "text" not in first:
                    raise CorpusFormatError(path, f"{where_qa}.answers[0]: missing 'text'")
                record = QARecord(
                    id=str(qa["id"]),
                    context=context,
                    question=qa["question"],
                    answer=first["text"],
                    answer_start=first.get("answer_start"),
                )
                record.validate()
                records.append(record)
    logger.info("loaded %d QA records from %s", len(records), path)
    return records


def _iter_article_files(path: Path) -> Iterable[Path]:
    if path.is_dir():
        yield from sorted(p for p in path.rglob("*") if p.suffix in (".txt", ".json", ".jsonl"))
    else:
        yield path


def _iter_article_objects(path: Path) -> Iterable[tuple[str, dict]]:
    for file in _iter_article_files(path):
        try:
            text = file.read_text(encoding="utf-8")
        except OSError as exc:
            raise CorpusFormatError(file, f"cannot read file: {exc}") from exc
        if file.suffix == ".jsonl":
            lines = [ln for ln in text.splitlines() if ln.strip()]
        else:
            lines = [text]
        for li, line in enumerate(lines):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(file, f"line {li + 1}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(file, f"line {li + 1}: expected a JSON object")
            default_id = file.name if len(lines) == 1 else f"{file.name}:{li + 1}"
            yield str(obj.get("id") or default_id), obj


def load_distractor_corpus(path) -> list[DistractorRecord]:
    """Parse RACE-style article files (file, directory, or JSONL) into records.

    Each article object carries parallel ``questions`` / ``options`` /
    ``answers`` lists; the three non-key options keep their original order.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusFormatError(path, "no such file or directory")

    records: list[DistractorRecord] = []
    for article_id, obj in _iter_article_objects(path):
        article = obj.get("article")
        questions = obj.get("questions")
        options = obj.get("options")
        answers = obj.get("answers")
        if not isinstance(article, str):
            raise CorpusFormatError(path, f"article {article_id!r}: missing 'article' string")
        if not (isinstance(questions, list) and isinstance(options, list) and isinstance(answers, list)):
            raise CorpusFormatError(
                path, f"article {article_id!r}: missing 'questions'/'options'/'answers' lists"
            )
        if not (len(questions) == len(options) == len(answers)):
            raise CorpusFormatError(
                path, f"article {article_id!r}: questions/options/answers lengths differ"
            )
        for qi, (question, opts, key) in enumerate(zip(questions, options, answers)):
            record_id = f"{article_id}:q{qi}"
            if not isinstance(opts, list) or len(opts) != 4:
                raise RecordValidationError(
                    record_id, f"expected 4 options, got {len(opts) if isinstance(opts, list) else opts!r}"
                )
            key = str(key).strip()
            if key not in _OPTION_KEYS:
                raise RecordValidationError(record_id, f"answer key {key!r} out of range A-D")
            key_index = _OPTION_KEYS.index(key)
            record = DistractorRecord(
                id=record_id,
                context=article.strip(),
                question=str(question).strip(),
                answer=str(opts[key_index]).strip(),
                distractors=[str(o).strip() for i, o in enumerate(opts) if i != key_index],
            )
            record.validate()
            records.append(record)
    logger.info("loaded %d distractor records from %s", len(records), path)
    return records


def make_qg_example(
    record: QARecord, mask: bool, max_source_tokens: int | None = QG_MAX_SOURCE_TOKENS
) -> Seq2SeqExample:
    """Build one qg-task pair; ``mask=True`` puts ``[MASK]`` in the answer slot."""
    source = seqformat.format_qg_source(
        record.context, None if mask else record.answer, max_source_tokens
    )
    target = seqformat.format_qg_target(record.question, record.answer)
    return Seq2SeqExample(source=source, target=target, task=TASK_QG, masked=mask, id=record.id)


def make_distractor_example(
    record: DistractorRecord, max_source_tokens: int | None = DISTRACTOR_MAX_SOURCE_TOKENS
) -> Seq2SeqExample:
    source = seqformat.format_distractor_source(
        record.question, record.answer, record.context, max_source_tokens
    )
    target = seqformat.join_distractor_target(record.distractors)
    return Seq2SeqExample(source=source, target=target, task=TASK_DISTRACTOR, id=record.id)


def _context_overflows(record_context: str, slot_tokens: int, limit: int | None, n_keys: int) -> bool:
    if limit is None:
        return False
    return seqformat.count_tokens(record_context) + slot_tokens + n_keys > limit


def make_qg_dataset(
    records: Sequence[QARecord],
    mask_probability: float,
    seed: int,
    max_source_tokens: int | None = QG_MAX_SOURCE_TOKENS,
    max_target_tokens: int | None = QG_MAX_TARGET_TOKENS,
) -> list[Seq2SeqExample]:
    """Compile qg examples, masking each record independently with the given
    probability under a generator seeded by ``seed``.

    Examples whose target (question + answer, which are never truncated)
    exceeds the target budget are dropped and counted.
    """
    if not 0.0 <= mask_probability <= 1.0:
        raise ValueError(f"mask_probability must be in [0, 1], got {mask_probability}")
    rng = random.Random(seed)
    examples: list[Seq2SeqExample] = []
    masked = truncated = dropped = 0
    for record in records:
        mask = rng.random() < mask_probability
        example = make_qg_example(record, mask, max_source_tokens)
        if max_target_tokens is not None and seqformat.count_tokens(example.target) > max_target_tokens:
            dropped += 1
            continue
        slot_tokens = seqformat.count_tokens(MASK if mask else record.answer.strip())
        if _context_overflows(record.context.strip(), slot_tokens, max_source_tokens, 2):
            truncated += 1
        masked += mask
        examples.append(example)
    logger.info(
        "compiled %d qg examples (%d masked, %d contexts truncated, %d dropped for over-limit targets)",
        len(examples), masked, truncated, dropped,
    )
    return examples


def make_distractor_dataset(
    records: Sequence[DistractorRecord],
    max_source_tokens: int | None = DISTRACTOR_MAX_SOURCE_TOKENS,
    max_target_tokens: int | None = DISTRACTOR_MAX_TARGET_TOKENS,
) -> list[Seq2SeqExample]:
    examples: list[Seq2SeqExample] = []
    truncated = dropped = 0
    for record in records:
        example = make_distractor_example(record, max_source_tokens)
        if max_target_tokens is not None and seqformat.count_tokens(example.target) > max_target_tokens:
            dropped += 1
            continue
        slot_tokens = seqformat.count_tokens(record.question.strip()) + seqformat.count_tokens(
            record.answer.strip()
        )
        if _context_overflows(record.context.strip(), slot_tokens, max_source_tokens, 3):
            truncated += 1
        examples.append(example)
    logger.info(
        "compiled %d distractor examples (%d contexts truncated, %d dropped for over-limit targets)",
        len(examples), truncated, dropped,
    )
    return examples


def write_examples_jsonl(examples: Iterable[Seq2SeqExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(example.to_json())
            fh.write("\n")


def read_examples_jsonl(path) -> list[Seq2SeqExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                examples.append(Seq2SeqExample.from_json(line))
    return examples


def split_records(
    records: Sequence,
    seed: int,
    dev_records: Sequence | None = None,
    dev_fraction: float = 0.1,
    test_fraction: float = 0.1,
    split_file=None,
) -> DatasetSplit:
    """Partition records into train/dev/test, disjoint by record id.

    With ``dev_records`` (an official dev set) only an internal test split is
    held out of ``records``. A ``split_file`` (JSON with train/dev/test id
    lists) overrides the seeded sampling entirely.
    """
    if split_file is not None:
        with open(split_file, encoding="utf-8") as fh:
            doc = json.load(fh)
        by_id = {r.id: r for r in records}
        if dev_records:
            by_id.update({r.id: r for r in dev_records})
        parts = {}
        for name in ("train", "dev", "test"):
            ids = doc.get(name, [])
            missing = [i for i in ids if i not in by_id]
            if missing:
                raise CorpusFormatError(split_file, f"{name}: unknown record ids {missing[:5]}")
            parts[name] = [by_id[i] for i in ids]
        split = DatasetSplit(parts["train"], parts["dev"], parts["test"], Path(split_file).name)
        split.validate()
        return split

    rng = random.Random(seed)
    indices = list(range(len(records)))
    rng.shuffle(indices)
    n_test = int(len(records) * test_fraction)
    test_idx = set(indices[:n_test])
    if dev_records is not None:
        train = [r for i, r in enumerate(records) if i not in test_idx]
        dev = list(dev_records)
        name = f"official-dev+heldout{int(test_fraction * 100)}pct-seed{seed}"
    else:
        n_dev = int(len(records) * dev_fraction)
        dev_idx = set(indices[n_test:n_test + n_dev])
        train = [r for i, r in enumerate(records) if i not in test_idx and i not in dev_idx]
        dev = [r for i, r in enumerate(records) if i in dev_idx]
        name = f"seeded{int(dev_fraction * 100)}/{int(test_fraction * 100)}pct-seed{seed}"
    test = [r for i, r in enumerate(records) if i in test_idx]
    split = DatasetSplit(train, dev, test, name)
    split.validate()
    return split
