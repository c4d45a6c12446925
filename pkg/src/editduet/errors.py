"""Exception hierarchy shared across the engine."""

from enum import Enum


class EditDuetError(Exception):
    """Base class for all engine errors."""


class SchemaError(EditDuetError):
    """Input file does not match its expected schema."""


class VocabularyError(SchemaError):
    """A label falls outside its closed vocabulary."""


class DimensionError(SchemaError):
    """Embeddings within one collection have mismatched dimensions."""


class EmptyCollection(EditDuetError):
    """Operation requires at least one segment."""


class BadIndex(EditDuetError):
    """Timeline index out of range."""


class UnknownFile(EditDuetError):
    """Referenced source file is not part of the collection."""


class OutOfBounds(EditDuetError):
    """Requested sub-clip interval exceeds the source duration."""


class InvertedRange(EditDuetError):
    """Requested sub-clip interval has start >= end."""


class MissingTemplate(EditDuetError):
    """No prompt template registered for the requested role."""


class EmbedderError(EditDuetError):
    """Text embedding backend failed."""


class GatewayErrorKind(str, Enum):
    TRANSPORT = "transport"
    AUTH = "auth"
    RATE_LIMITED = "rate_limited"
    EXHAUSTED = "exhausted"


class GatewayError(EditDuetError):
    """Chat gateway failure, tagged with a transport-level kind."""

    def __init__(self, kind: GatewayErrorKind, message: str):
        super().__init__(f"{kind.value}: {message}")
        self.kind = kind


class CacheMiss(EditDuetError):
    """Replay gateway has no cached reply for this request."""


class UnparseableScore(EditDuetError):
    """Scorer reply contained no usable 1-5 digit."""


class UnparseableVerdict(EditDuetError):
    """Judge reply contained no usable A/B preference."""


class BudgetExhausted(EditDuetError):
    """Attempt or step budget ran out before completion."""


class BadDuration(EditDuetError):
    """Non-positive target duration."""


class LengthMismatch(EditDuetError):
    """Parallel input lists have different lengths."""


class OutOfRange(EditDuetError):
    """Numeric argument outside its documented range."""


class TieError(EditDuetError):
    """Majority vote is undefined for an even split."""


class MissingKeyframe(EditDuetError):
    """A timeline clip cannot be resolved to a keyframe image."""
