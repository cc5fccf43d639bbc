"""Pretrained-checkpoint backend (optional, install the ``hf`` extra).

Fine-tunes a seq2seq checkpoint such as ``t5-small`` with the same contract
as the local backend: constant-rate optimizer, per-epoch dev cross-entropy,
keep the best epoch. This is the reproduction path for paper-scale results;
it needs the pretrained weights to be downloadable or cached.
"""

from __future__ import annotations

import json
import logging
import random
import threading
from pathlib import Path

from ..errors import CheckpointError, ConfigurationError
from .base import Candidate, DecodeParams, STRATEGY_BEAM, TrainConfig, TrainedModelHandle

logger = logging.getLogger(__name__)

_METADATA_FILE = "metadata.json"


def _import_transformers():
    try:
        import transformers
    except ImportError as exc:
        raise ConfigurationError(
            "this model_id needs the 'hf' extra (pip install 'leaf-mcq[hf]')"
        ) from exc
    return transformers


def _load_pretrained(model_id: str):
    transformers = _import_transformers()
    try:
        tokenizer = transformers.AutoTokenizer.from_pretrained(model_id)
        model = transformers.AutoModelForSeq2SeqLM.from_pretrained(model_id)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot resolve pretrained model {model_id!r}: {exc}") from exc
    return tokenizer, model


def _encode_batch(tokenizer, batch, config: TrainConfig):
    import torch

    enc = tokenizer(
        [ex.source for ex in batch],
        max_length=config.max_source_tokens, truncation=True, padding=True,
        return_tensors="pt",
    )
    labels = tokenizer(
        [ex.target for ex in batch],
        max_length=config.max_target_tokens, truncation=True, padding=True,
        return_tensors="pt",
    ).input_ids
    labels[labels == tokenizer.pad_token_id] = -100
    return enc, labels


def _dataset_loss(model, tokenizer, examples, config: TrainConfig) -> float:
    import torch

    model.eval()
    total, tokens = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(examples), config.batch_size):
            enc, labels = _encode_batch(tokenizer, examples[start:start + config.batch_size], config)
            out = model(**enc, labels=labels)
            n = int((labels != -100).sum())
            total += float(out.loss) * n
            tokens += n
    return total / max(1, tokens)


def train_hf(config: TrainConfig, train_examples, dev_examples, out_dir) -> "HfTrainedModel":
    import torch

    config.validate()
    if not train_examples or not dev_examples:
        raise ValueError("train and dev example lists must be non-empty")
    task = train_examples[0].task
    tokenizer, model = _load_pretrained(config.model_id)
    tokenizer.add_tokens(["[MASK]", "[SEP]"])
    model.resize_token_embeddings(len(tokenizer))

    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)

    out_dir = Path(out_dir)
    best_dir = out_dir / "best"
    history = []
    best_epoch, best_val_loss = 0, float("inf")
    order = list(range(len(train_examples)))
    oom_types = tuple(
        t for t in (
            getattr(torch, "OutOfMemoryError", None),
            getattr(torch.cuda, "OutOfMemoryError", None),
        )
        if t is not None
    )
    for epoch in range(1, config.epochs + 1):
        model.train()
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            batch = [train_examples[i] for i in order[start:start + config.batch_size]]
            try:
                enc, labels = _encode_batch(tokenizer, batch, config)
                loss = model(**enc, labels=labels).loss
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            except oom_types as exc:
                raise MemoryError(
                    f"out of memory at batch_size={config.batch_size}; "
                    "retry with a smaller batch_size"
                ) from exc
        dev_loss = _dataset_loss(model, tokenizer, dev_examples, config)
        history.append({"epoch": epoch, "dev_loss": dev_loss})
        logger.info("epoch %d/%d: dev %.4f", epoch, config.epochs, dev_loss)
        if dev_loss < best_val_loss:
            best_epoch, best_val_loss = epoch, dev_loss
            model.save_pretrained(best_dir)
            tokenizer.save_pretrained(best_dir)

    metadata = {
        "backend": "hf",
        "task": task,
        "config": config.to_dict(),
        "best_epoch": best_epoch,
        "best_val_loss": best_val_loss,
        "history": history,
        "optimizer": {
            "name": "AdamW",
            "learning_rate": config.learning_rate,
            "lr_schedule": "constant",
        },
    }
    with open(out_dir / _METADATA_FILE, "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2)
    return HfTrainedModel(out_dir, metadata)


class HfTrainedModel(TrainedModelHandle):
    def __init__(self, checkpoint_path, metadata: dict):
        config = TrainConfig.from_dict(metadata["config"])
        super().__init__(
            checkpoint_path,
            task=metadata["task"],
            config=config,
            best_epoch=metadata["best_epoch"],
            best_val_loss=metadata["best_val_loss"],
        )
        self.metadata = metadata
        self._model = None
        self._tokenizer = None
        self._lock = threading.Lock()

    def _ensure_loaded(self) -> None:
        if self._model is not None:
            return
        transformers = _import_transformers()
        best_dir = Path(self.checkpoint_path) / "best"
        if not best_dir.exists():
            raise CheckpointError(f"missing checkpoint directory {best_dir}")
        self._tokenizer = transformers.AutoTokenizer.from_pretrained(best_dir)
        self._model = transformers.AutoModelForSeq2SeqLM.from_pretrained(best_dir)
        self._model.eval()

    def generate(self, source: str, params: DecodeParams) -> list[Candidate]:
        import torch

        params.validate()
        if not source:
            raise ValueError("source must be non-empty")
        self._ensure_loaded()
        enc = self._tokenizer(
            source, max_length=self.config.max_source_tokens, truncation=True,
            return_tensors="pt",
        )
        with self._lock, torch.no_grad():
            if params.strategy == STRATEGY_BEAM:
                out = self._model.generate(
                    **enc, num_beams=params.beam_width,
                    num_return_sequences=params.beam_width,
                    max_new_tokens=params.max_new_tokens, length_penalty=1.0,
                    output_scores=True, return_dict_in_generate=True,
                )
            else:
                torch.manual_seed(params.seed)
                out = self._model.generate(
                    **enc, do_sample=True, temperature=params.temperature,
                    num_return_sequences=params.num_samples,
                    max_new_tokens=params.max_new_tokens,
                    output_scores=True, return_dict_in_generate=True,
                )
        scores = getattr(out, "sequences_scores", None)
        candidates = []
        for i, seq in enumerate(out.sequences):
            text = self._tokenizer.decode(seq, skip_special_tokens=True)
            score = float(scores[i]) if scores is not None else -float(i)
            candidates.append(Candidate(text=text, score=score))
        candidates.sort(key=lambda c: c.score, reverse=True)
        return candidates[: params.width]

    def evaluate_loss(self, examples) -> float:
        if not examples:
            raise ValueError("examples must be non-empty")
        self._ensure_loaded()
        with self._lock:
            return _dataset_loss(self._model, self._tokenizer, list(examples), self.config)


def load_hf(path) -> HfTrainedModel:
    path = Path(path)
    metadata_file = path / _METADATA_FILE
    if not metadata_file.exists():
        raise CheckpointError(f"no checkpoint metadata at {metadata_file}")
    with open(metadata_file, encoding="utf-8") as fh:
        metadata = json.load(fh)
    return HfTrainedModel(path, metadata)
