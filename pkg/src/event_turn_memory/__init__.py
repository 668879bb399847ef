"""
Event-Turn Memory
Two-level conversational memory with LLM-guided retrieval.
"""

__version__ = "1.0.0"
__author__ = "Event-Turn Memory Team"
__description__ = "Event/turn hierarchical memory for long conversations, with a benchmark harness"

from .config.settings import AppConfig, MemoryConfig, RetrievalConfig, get_config
from .encoders import DistractorNoiseEncoder, HashingEncoder
from .exceptions import MemoryEngineError
from .ingestion import DialogueTurn, Ingestor
from .retrieval import Retriever
from .store import MemoryStore
from .system import ConversationMemory, QueryResult, quick_answer

__all__ = [
    "AppConfig",
    "ConversationMemory",
    "DialogueTurn",
    "DistractorNoiseEncoder",
    "HashingEncoder",
    "Ingestor",
    "MemoryConfig",
    "MemoryEngineError",
    "MemoryStore",
    "QueryResult",
    "RetrievalConfig",
    "Retriever",
    "get_config",
    "quick_answer",
]
