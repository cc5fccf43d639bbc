"""Shared types for the replaceable seq2seq model interface.

Everything outside this subpackage talks to models through
:class:`TextGenerator`: ``generate`` plus ``evaluate_loss`` and a ``task``
tag. Concrete backends (the self-contained local transformer, the optional
pretrained-checkpoint backend, the scripted stub) all satisfy it, so they can
be swapped without touching the pipeline or the service.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Protocol, runtime_checkable

from ..errors import ConfigurationError

TASK_QG = "qa_generation"
TASK_DISTRACTOR = "distractor_generation"

STRATEGY_BEAM = "beam"
STRATEGY_SAMPLE = "sample"


@dataclass
class TrainConfig:
    """All training hyperparameters.

    ``model_id`` selects the backend: ``local:{tiny,small,base}`` builds the
    self-contained transformer; anything else is treated as a pretrained
    checkpoint identifier for the optional hf backend.
    """

    model_id: str = "t5-small"
    learning_rate: float = 1e-4
    batch_size: int = 16
    max_source_tokens: int = 300
    max_target_tokens: int = 80
    epochs: int = 5
    seed: int = 13
    mask_probability: float = 0.3

    def validate(self) -> None:
        positive = (
            ("learning_rate", self.learning_rate),
            ("batch_size", self.batch_size),
            ("max_source_tokens", self.max_source_tokens),
            ("max_target_tokens", self.max_target_tokens),
            ("epochs", self.epochs),
            ("seed", self.seed),
        )
        for name, value in positive:
            if value <= 0:
                raise ConfigurationError(f"{name} must be > 0, got {value}")
        if not 0.0 <= self.mask_probability <= 1.0:
            raise ConfigurationError(
                f"mask_probability must be in [0, 1], got {self.mask_probability}"
            )

    @classmethod
    def qg_defaults(cls, **overrides) -> "TrainConfig":
        return cls(**{**dict(max_source_tokens=300, max_target_tokens=80), **overrides})

    @classmethod
    def distractor_defaults(cls, **overrides) -> "TrainConfig":
        defaults = dict(max_source_tokens=512, max_target_tokens=64, mask_probability=0.0)
        return cls(**{**defaults, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown training config keys: {sorted(unknown)}")
        config = cls(**d)
        config.validate()
        return config


@dataclass
class DecodeParams:
    """Decoding settings; ``temperature`` and ``seed`` apply to sampling only."""

    strategy: str = STRATEGY_BEAM
    beam_width: int = 4
    num_samples: int = 4
    max_new_tokens: int = 96
    temperature: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.strategy not in (STRATEGY_BEAM, STRATEGY_SAMPLE):
            raise ConfigurationError(f"unknown decode strategy {self.strategy!r}")
        if self.beam_width < 1 or self.num_samples < 1:
            raise ConfigurationError("beam_width and num_samples must be >= 1")
        if self.max_new_tokens < 1:
            raise ConfigurationError("max_new_tokens must be >= 1")
        if self.temperature <= 0:
            raise ConfigurationError("temperature must be > 0")

    @property
    def width(self) -> int:
        return self.beam_width if self.strategy == STRATEGY_BEAM else self.num_samples


@dataclass
class Candidate:
    """One decoded string with its length-normalized log-likelihood."""

    text: str
    score: float


@runtime_checkable
class TextGenerator(Protocol):
    task: str

    def generate(self, source: str, params: DecodeParams) -> list[Candidate]:
        ...

    def evaluate_loss(self, examples) -> float:
        ...


class TrainedModelHandle:
    """A persisted, loadable model: checkpoint path plus training summary."""

    def __init__(self, checkpoint_path, task: str, config: TrainConfig,
                 best_epoch: int, best_val_loss: float):
        self.checkpoint_path = str(checkpoint_path)
        self.task = task
        self.config = config
        self.best_epoch = best_epoch
        self.best_val_loss = best_val_loss

    def generate(self, source: str, params: DecodeParams) -> list[Candidate]:
        raise NotImplementedError

    def evaluate_loss(self, examples) -> float:
        raise NotImplementedError
