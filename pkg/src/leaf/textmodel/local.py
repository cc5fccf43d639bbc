"""Self-contained transformer backend (no pretrained weights required).

A word-level encoder-decoder trained from scratch. It exists so the full
training / evaluation / decoding contract can run offline and fast; for
paper-scale quality, train the hf backend instead. The output projection is
zero-initialized, which makes a freshly built model predict the uniform
distribution (cross-entropy exactly ln V) and trains normally.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import random
import threading
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import CheckpointError, ConfigurationError
from .base import Candidate, DecodeParams, STRATEGY_BEAM, TrainConfig, TrainedModelHandle
from .vocab import WordVocab

logger = logging.getLogger(__name__)

PRESETS = {
    "tiny": dict(d_model=64, nhead=4, encoder_layers=2, decoder_layers=2,
                 dim_feedforward=128, dropout=0.0, vocab_cap=8000),
    "small": dict(d_model=256, nhead=8, encoder_layers=4, decoder_layers=4,
                  dim_feedforward=1024, dropout=0.1, vocab_cap=30000),
    "base": dict(d_model=512, nhead=8, encoder_layers=6, decoder_layers=6,
                 dim_feedforward=2048, dropout=0.1, vocab_cap=32000),
}

_WEIGHTS_FILE = "weights.pt"
_VOCAB_FILE = "vocab.json"
_METADATA_FILE = "metadata.json"

_OOM_TYPES = tuple(
    t for t in (
        getattr(torch, "OutOfMemoryError", None),
        getattr(torch.cuda, "OutOfMemoryError", None),
    )
    if t is not None
)


def local_preset(model_id: str) -> dict:
    name = model_id.split(":", 1)[1] if ":" in model_id else model_id
    if name not in PRESETS:
        raise ConfigurationError(
            f"unknown local model {model_id!r}; choose from "
            + ", ".join(f"local:{p}" for p in PRESETS)
        )
    return dict(PRESETS[name])


class Seq2SeqTransformer(nn.Module):
    def __init__(self, vocab_size: int, pad_id: int, d_model: int, nhead: int,
                 encoder_layers: int, decoder_layers: int, dim_feedforward: int,
                 dropout: float, max_positions: int):
        super().__init__()
        self.pad_id = pad_id
        self.scale = math.sqrt(d_model)
        self.embed = nn.Embedding(vocab_size, d_model, padding_idx=pad_id)
        self.pos = nn.Embedding(max_positions, d_model)
        self.transformer = nn.Transformer(
            d_model=d_model,
            nhead=nhead,
            num_encoder_layers=encoder_layers,
            num_decoder_layers=decoder_layers,
            dim_feedforward=dim_feedforward,
            dropout=dropout,
            batch_first=True,
            norm_first=True,
        )
        self.out_proj = nn.Linear(d_model, vocab_size)
        # uniform predictive distribution at initialization
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)
        self.max_positions = max_positions

    @staticmethod
    def _causal_mask(t: int, device) -> torch.Tensor:
        return torch.triu(torch.ones(t, t, dtype=torch.bool, device=device), diagonal=1)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.size(1), device=ids.device)
        return self.embed(ids) * self.scale + self.pos(positions)

    def encode_source(self, src: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        pad_mask = src.eq(self.pad_id)
        memory = self.transformer.encoder(self._embed(src), src_key_padding_mask=pad_mask)
        return memory, pad_mask

    def decode_prefix(self, prefix: torch.Tensor, memory: torch.Tensor,
                      memory_pad_mask: torch.Tensor) -> torch.Tensor:
        """Logits for the next token after each prefix (last position only)."""
        causal = self._causal_mask(prefix.size(1), prefix.device)
        out = self.transformer.decoder(
            self._embed(prefix), memory,
            tgt_mask=causal, memory_key_padding_mask=memory_pad_mask,
        )
        return self.out_proj(out[:, -1])

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        src_pad = src.eq(self.pad_id)
        tgt_pad = tgt_in.eq(self.pad_id)
        causal = self._causal_mask(tgt_in.size(1), src.device)
        out = self.transformer(
            self._embed(src), self._embed(tgt_in),
            tgt_mask=causal,
            src_key_padding_mask=src_pad,
            tgt_key_padding_mask=tgt_pad,
            memory_key_padding_mask=src_pad,
        )
        return self.out_proj(out)


def _pad_batch(seqs: list[list[int]], pad_id: int) -> torch.Tensor:
    width = max(len(s) for s in seqs)
    return torch.tensor([s + [pad_id] * (width - len(s)) for s in seqs], dtype=torch.long)


def _encode_examples(vocab: WordVocab, examples, config: TrainConfig) -> list[tuple[list[int], list[int]]]:
    encoded = []
    for ex in examples:
        src = vocab.encode(ex.source, limit=config.max_source_tokens)
        tgt = vocab.encode(ex.target, limit=config.max_target_tokens, add_eos=True)
        encoded.append((src, tgt))
    return encoded


def _batch_loss(model: Seq2SeqTransformer, vocab: WordVocab,
                batch: list[tuple[list[int], list[int]]]) -> tuple[torch.Tensor, int]:
    """Summed token cross-entropy and token count for one batch."""
    src = _pad_batch([s for s, _ in batch], vocab.pad_id)
    tgt = _pad_batch([t for _, t in batch], vocab.pad_id)
    tgt_in = torch.cat(
        [torch.full((tgt.size(0), 1), vocab.bos_id, dtype=torch.long), tgt[:, :-1]], dim=1
    )
    logits = model(src, tgt_in)
    loss = F.cross_entropy(
        logits.reshape(-1, logits.size(-1)), tgt.reshape(-1),
        ignore_index=vocab.pad_id, reduction="sum",
    )
    n_tokens = int(tgt.ne(vocab.pad_id).sum())
    return loss, n_tokens


def _dataset_loss(model: Seq2SeqTransformer, vocab: WordVocab,
                  encoded: list, batch_size: int) -> float:
    model.eval()
    total, tokens = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(encoded), batch_size):
            loss, n = _batch_loss(model, vocab, encoded[start:start + batch_size])
            total += float(loss)
            tokens += n
    return total / max(1, tokens)


def train_local(config: TrainConfig, train_examples, dev_examples, out_dir) -> "LocalTrainedModel":
    """Train from scratch, keeping the epoch checkpoint with minimal dev loss."""
    config.validate()
    preset = local_preset(config.model_id)
    if not train_examples or not dev_examples:
        raise ValueError("train and dev example lists must be non-empty")
    tasks = {ex.task for ex in train_examples}
    if len(tasks) != 1:
        raise ValueError(f"mixed tasks in training data: {sorted(tasks)}")
    task = tasks.pop()

    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)

    vocab = WordVocab.build(
        (text for ex in train_examples for text in (ex.source, ex.target)),
        max_size=preset.pop("vocab_cap"),
    )
    max_positions = max(config.max_source_tokens, config.max_target_tokens, 256) + 8
    model = Seq2SeqTransformer(
        vocab_size=len(vocab), pad_id=vocab.pad_id, max_positions=max_positions, **preset
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    train_encoded = _encode_examples(vocab, train_examples, config)
    dev_encoded = _encode_examples(vocab, dev_examples, config)

    history = []
    best_epoch, best_val_loss, best_state = 0, math.inf, None
    order = list(range(len(train_encoded)))
    for epoch in range(1, config.epochs + 1):
        model.train()
        rng.shuffle(order)
        epoch_total, epoch_tokens = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_encoded[i] for i in order[start:start + config.batch_size]]
            try:
                loss, n_tokens = _batch_loss(model, vocab, batch)
                optimizer.zero_grad()
                (loss / max(1, n_tokens)).backward()
                optimizer.step()
            except _OOM_TYPES as exc:
                raise MemoryError(
                    f"out of memory at batch_size={config.batch_size}; "
                    "retry with a smaller batch_size"
                ) from exc
            epoch_total += float(loss.detach())
            epoch_tokens += n_tokens
        train_loss = epoch_total / max(1, epoch_tokens)
        dev_loss = _dataset_loss(model, vocab, dev_encoded, config.batch_size)
        history.append({"epoch": epoch, "train_loss": train_loss, "dev_loss": dev_loss})
        logger.info("epoch %d/%d: train %.4f dev %.4f", epoch, config.epochs, train_loss, dev_loss)
        if dev_loss < best_val_loss:
            best_epoch, best_val_loss = epoch, dev_loss
            best_state = copy.deepcopy(model.state_dict())

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(best_state, out_dir / _WEIGHTS_FILE)
    vocab.save(out_dir / _VOCAB_FILE)
    metadata = {
        "backend": "local",
        "task": task,
        "config": config.to_dict(),
        "preset": {**local_preset(config.model_id), "max_positions": max_positions},
        "best_epoch": best_epoch,
        "best_val_loss": best_val_loss,
        "history": history,
        "optimizer": {
            "name": "Adam",
            "learning_rate": config.learning_rate,
            "betas": [0.9, 0.999],
            "eps": 1e-8,
            "weight_decay": 0.0,
            "lr_schedule": "constant",
        },
        "vocab_size": len(vocab),
    }
    with open(out_dir / _METADATA_FILE, "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2)
    logger.info("saved checkpoint to %s (best epoch %d, dev loss %.4f)",
                out_dir, best_epoch, best_val_loss)
    return LocalTrainedModel(out_dir, metadata)


@dataclass
class _Beam:
    ids: list[int]
    score: float
    done: bool


def _beam_search(model: Seq2SeqTransformer, vocab: WordVocab, src_ids: list[int],
                 width: int, max_new_tokens: int) -> list[Candidate]:
    src = torch.tensor([src_ids], dtype=torch.long)
    memory, src_pad = model.encode_source(src)
    beams = [_Beam([vocab.bos_id], 0.0, False)]
    steps = min(max_new_tokens, model.max_positions - 2)
    for _ in range(steps):
        alive = [b for b in beams if not b.done]
        if not alive:
            break
        prefix = torch.tensor([b.ids for b in alive], dtype=torch.long)
        logits = model.decode_prefix(
            prefix, memory.expand(len(alive), -1, -1), src_pad.expand(len(alive), -1)
        )
        logp = F.log_softmax(logits, dim=-1)
        top = logp.topk(min(width, logp.size(-1)), dim=-1)
        pool = [b for b in beams if b.done]
        for bi, beam in enumerate(alive):
            for lp, tok in zip(top.values[bi].tolist(), top.indices[bi].tolist()):
                pool.append(_Beam(beam.ids + [tok], beam.score + lp, tok == vocab.eos_id))
        pool.sort(key=lambda b: b.score, reverse=True)
        beams = pool[:width]

    best_by_text: dict[str, Candidate] = {}
    for beam in beams:
        generated = len(beam.ids) - 1
        candidate = Candidate(
            text=vocab.decode(beam.ids[1:]), score=beam.score / max(1, generated)
        )
        kept = best_by_text.get(candidate.text)
        if kept is None or candidate.score > kept.score:
            best_by_text[candidate.text] = candidate
    out = sorted(best_by_text.values(), key=lambda c: c.score, reverse=True)
    return out[:width]


def _sample(model: Seq2SeqTransformer, vocab: WordVocab, src_ids: list[int],
            num_samples: int, max_new_tokens: int, temperature: float, seed: int) -> list[Candidate]:
    generator = torch.Generator()
    generator.manual_seed(seed)
    src = torch.tensor([src_ids], dtype=torch.long)
    memory, src_pad = model.encode_source(src)
    memory = memory.expand(num_samples, -1, -1)
    src_pad = src_pad.expand(num_samples, -1)

    ids = torch.full((num_samples, 1), vocab.bos_id, dtype=torch.long)
    scores = torch.zeros(num_samples)
    lengths = torch.zeros(num_samples, dtype=torch.long)
    done = torch.zeros(num_samples, dtype=torch.bool)
    steps = min(max_new_tokens, model.max_positions - 2)
    for _ in range(steps):
        logits = model.decode_prefix(ids, memory, src_pad)
        probs = F.softmax(logits / temperature, dim=-1)
        next_tok = torch.multinomial(probs, 1, generator=generator).squeeze(1)
        next_tok = torch.where(done, torch.full_like(next_tok, vocab.pad_id), next_tok)
        token_logp = F.log_softmax(logits, dim=-1).gather(1, next_tok.unsqueeze(1)).squeeze(1)
        scores += token_logp * (~done)
        lengths += (~done).long()
        done |= next_tok.eq(vocab.eos_id)
        ids = torch.cat([ids, next_tok.unsqueeze(1)], dim=1)
        if bool(done.all()):
            break

    candidates = [
        Candidate(
            text=vocab.decode(ids[i, 1:].tolist()),
            score=float(scores[i]) / max(1, int(lengths[i])),
        )
        for i in range(num_samples)
    ]
    candidates.sort(key=lambda c: c.score, reverse=True)
    return candidates


class LocalTrainedModel(TrainedModelHandle):
    """Handle over a local checkpoint directory; weights load lazily.

    generate()/evaluate_loss() are safe to call from concurrent threads: the
    forward passes are serialized behind a lock.
    """

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
        self._model: Seq2SeqTransformer | None = None
        self._vocab: WordVocab | None = None
        self._lock = threading.Lock()

    def _ensure_loaded(self) -> None:
        if self._model is not None:
            return
        path = Path(self.checkpoint_path)
        weights = path / _WEIGHTS_FILE
        if not weights.exists():
            raise CheckpointError(f"missing weights file {weights}")
        self._vocab = WordVocab.load(path / _VOCAB_FILE)
        preset = dict(self.metadata["preset"])
        model = Seq2SeqTransformer(
            vocab_size=self.metadata["vocab_size"],
            pad_id=self._vocab.pad_id,
            d_model=preset["d_model"],
            nhead=preset["nhead"],
            encoder_layers=preset["encoder_layers"],
            decoder_layers=preset["decoder_layers"],
            dim_feedforward=preset["dim_feedforward"],
            dropout=preset["dropout"],
            max_positions=preset["max_positions"],
        )
        model.load_state_dict(torch.load(weights, map_location="cpu", weights_only=True))
        model.eval()
        self._model = model

    def generate(self, source: str, params: DecodeParams) -> list[Candidate]:
        params.validate()
        if not source:
            raise ValueError("source must be non-empty")
        self._ensure_loaded()
        src_ids = self._vocab.encode(source, limit=self.config.max_source_tokens)
        with self._lock, torch.no_grad():
            if params.strategy == STRATEGY_BEAM:
                return _beam_search(
                    self._model, self._vocab, src_ids, params.beam_width, params.max_new_tokens
                )
            return _sample(
                self._model, self._vocab, src_ids, params.num_samples,
                params.max_new_tokens, params.temperature, params.seed,
            )

    def evaluate_loss(self, examples) -> float:
        if not examples:
            raise ValueError("examples must be non-empty")
        self._ensure_loaded()
        encoded = _encode_examples(self._vocab, examples, self.config)
        with self._lock:
            return _dataset_loss(self._model, self._vocab, encoded, self.config.batch_size)


def load_local(path) -> LocalTrainedModel:
    path = Path(path)
    metadata_file = path / _METADATA_FILE
    if not metadata_file.exists():
        raise CheckpointError(f"no checkpoint metadata at {metadata_file}")
    with open(metadata_file, encoding="utf-8") as fh:
        metadata = json.load(fh)
    return LocalTrainedModel(path, metadata)
