"""
Exception hierarchy for the event-turn memory engine.
"""
from typing import Any, Optional


class MemoryEngineError(Exception):
    """Base class for all engine errors."""


class ConfigurationError(MemoryEngineError):
    """Invalid settings or pricing file."""


# Store

class StoreError(MemoryEngineError):
    """Base class for memory store errors."""


class DuplicateIdError(StoreError):
    def __init__(self, kind: str, item_id: Any):
        self.kind = kind
        self.item_id = item_id
        super().__init__(f"{kind} {item_id!r} already exists")


class UnknownIdError(StoreError):
    def __init__(self, kind: str, item_id: Any):
        self.kind = kind
        self.item_id = item_id
        super().__init__(f"unknown {kind} {item_id!r}")


class EmptyEventError(StoreError):
    def __init__(self):
        super().__init__("an event needs at least one initial turn")


class SnapshotFormatError(StoreError):
    """Snapshot file is corrupted or was written by an incompatible version."""


# Embedding index

class EmbeddingIndexError(MemoryEngineError):
    """Base class for embedding index errors."""


class DimensionMismatchError(EmbeddingIndexError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected dimension {expected}, got {actual}")


class ZeroNormError(EmbeddingIndexError):
    def __init__(self, message: str = "cosine is undefined for the null embedding"):
        super().__init__(message)


class DuplicateRegistrationError(EmbeddingIndexError):
    def __init__(self, layer: str, item_id: Any):
        self.layer = layer
        self.item_id = item_id
        super().__init__(f"{item_id!r} is already registered in the {layer} layer")


# LLM gateway

class GatewayError(MemoryEngineError):
    """Base class for LLM gateway errors."""


class UnknownFamilyError(GatewayError):
    def __init__(self, family: Any):
        self.family = family
        super().__init__(f"unknown prompt family {family!r}")


class MissingVariableError(GatewayError):
    def __init__(self, family: Any, variable: str):
        self.family = family
        self.variable = variable
        super().__init__(f"prompt {family} is missing variable {variable!r}")


class ProviderUnavailableError(GatewayError):
    """The provider could not be reached or returned an HTTP error."""


class SchemaFailureError(GatewayError):
    def __init__(self, family: Any, attempts: int, raw_text: str, reason: Optional[str] = None):
        self.family = family
        self.attempts = attempts
        self.raw_text = raw_text
        self.reason = reason
        message = f"{family} output failed validation after {attempts} attempts"
        if reason:
            message += f": {reason}"
        super().__init__(message)


# Dataset

class DatasetError(MemoryEngineError):
    """Base class for dataset errors."""


class DatasetParseError(DatasetError):
    def __init__(self, message: str, location: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class DatasetIntegrityError(DatasetError):
    def __init__(self, message: str, offending_id: Any):
        self.offending_id = offending_id
        super().__init__(f"{message} ({offending_id!r})")
