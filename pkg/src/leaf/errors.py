"""Exception types shared across the package."""


class LeafError(Exception):
    """Base class for all package errors."""


class CorpusFormatError(LeafError):
    """A corpus file does not match its published schema."""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class RecordValidationError(LeafError):
    """A single corpus record violates a record-level invariant."""

    def __init__(self, record_id: str, message: str):
        self.record_id = record_id
        super().__init__(f"record {record_id!r}: {message}")


class ConfigurationError(LeafError):
    """Invalid or unresolvable configuration (bad model id, bad config file)."""


class CheckpointError(LeafError):
    """A model checkpoint is missing or unreadable."""


class EmptyInputError(LeafError):
    """Input text contains no usable sentences."""


class GenerationError(LeafError):
    """A model failure during pipeline generation, with passage context."""

    def __init__(self, passage_index: int, message: str):
        self.passage_index = passage_index
        super().__init__(f"passage {passage_index}: {message}")
