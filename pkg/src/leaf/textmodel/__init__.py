"""The replaceable seq2seq model layer.

``train``/``load_handle`` dispatch on the model id / checkpoint metadata:
``local:*`` ids use the self-contained transformer (torch only), anything
else goes to the optional pretrained backend. Torch is imported lazily so
stub-backed code paths stay light.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import CheckpointError
from .base import (
    Candidate,
    DecodeParams,
    TASK_DISTRACTOR,
    TASK_QG,
    TextGenerator,
    TrainConfig,
    TrainedModelHandle,
)
from .stub import StubModel

__all__ = [
    "Candidate",
    "DecodeParams",
    "StubModel",
    "TASK_DISTRACTOR",
    "TASK_QG",
    "TextGenerator",
    "TrainConfig",
    "TrainedModelHandle",
    "evaluate_loss",
    "generate",
    "load_handle",
    "train",
]


def train(config: TrainConfig, train_examples, dev_examples, out_dir) -> TrainedModelHandle:
    """Fine-tune / train per ``config`` and persist the best-epoch checkpoint."""
    if config.model_id.startswith("local:"):
        from .local import train_local

        return train_local(config, train_examples, dev_examples, out_dir)
    from .hf import train_hf

    return train_hf(config, train_examples, dev_examples, out_dir)


def load_handle(path) -> TrainedModelHandle:
    """Restore a handle from a checkpoint directory written by :func:`train`."""
    metadata_file = Path(path) / "metadata.json"
    if not metadata_file.exists():
        raise CheckpointError(f"no checkpoint metadata at {metadata_file}")
    with open(metadata_file, encoding="utf-8") as fh:
        backend = json.load(fh).get("backend")
    if backend == "local":
        from .local import load_local

        return load_local(path)
    if backend == "hf":
        from .hf import load_hf

        return load_hf(path)
    raise CheckpointError(f"unknown checkpoint backend {backend!r} in {metadata_file}")


def evaluate_loss(handle, examples) -> float:
    """Mean token-level cross-entropy (nats) of the gold targets."""
    return handle.evaluate_loss(examples)


def generate(handle, source: str, params: DecodeParams) -> list[Candidate]:
    return handle.generate(source, params)
