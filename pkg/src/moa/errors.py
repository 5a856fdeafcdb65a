"""Exception hierarchy shared across the toolkit.

Everything raised on purpose derives from MoaError so the CLI can map
failures to a single-line error and exit code 1. Programming errors
(bad arguments to library functions) raise ValueError/TypeError as usual.
"""


class MoaError(Exception):
    """Base class for all toolkit-level failures."""


class CohortParseError(MoaError):
    """A patient-case file could not be parsed; message names the record."""


class CohortValidationError(MoaError):
    """Parsed cohort data violates an invariant (duplicate ids, bad labels)."""


class DimensionMismatchError(MoaError):
    """Vector dimensions disagree where uniformity is required."""


class EmbeddingIoError(MoaError):
    """Embedding or stats file is malformed; message carries the line number."""


class EmptyTextError(MoaError):
    """Text to embed is empty (or token-free) after cleaning."""


class KnowledgeBaseError(MoaError):
    """Corpus ingestion, chunking, or index build/load failure."""


class OfflineViolationError(MoaError):
    """A live network call was attempted while offline mode is active."""


class TransportError(MoaError):
    """HTTP transport failed after exhausting retries."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class FixtureMissError(MoaError):
    """Offline replay requested a fixture that was never recorded."""


class BackendError(MoaError):
    """Chat backend returned garbage or failed after retries."""


class TrainingError(MoaError):
    """Classifier training preconditions violated (e.g. single-class data)."""


class EvaluationError(MoaError):
    """Metric or cross-validation preconditions violated."""


class ConfigError(MoaError):
    """Run configuration file is invalid or references missing paths."""
