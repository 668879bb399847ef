"""
Shared fixtures for the event-turn memory tests.
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from event_turn_memory.config.settings import (
    AppConfig,
    EncoderConfig,
    LLMConfig,
    MemoryConfig,
    RetrievalConfig,
)
from event_turn_memory.encoders import HashingEncoder
from event_turn_memory.llm.gateway import LLMGateway
from event_turn_memory.llm.providers import ScriptedStubProvider
from event_turn_memory.store import MemoryStore, Metadata, TurnNode
from event_turn_memory.utils.text import content_tokens


def make_turn(store: MemoryStore, turn_id: int, text: str, speaker: str = "Evan",
              timestamp: str = "") -> TurnNode:
    """Insert a turn directly, without any LLM call."""
    node = TurnNode(turn_id=turn_id, speaker=speaker, text=text, timestamp=timestamp,
                    metadata=Metadata(keywords=content_tokens(text) or ["turn"]))
    node.embedding_id = store.embed_turn(turn_id, text)
    store.insert_turn(node)
    return node


@pytest.fixture
def encoder():
    return HashingEncoder(dimension=64, seed=13)


@pytest.fixture
def store(encoder):
    return MemoryStore(encoder, conversation_id="test-conv")


@pytest.fixture
def stub():
    return ScriptedStubProvider()


@pytest.fixture
def gateway(stub):
    return LLMGateway(stub)


@pytest.fixture
def settings():
    """Stub provider, hashing encoder, default constants."""
    return AppConfig(
        memory=MemoryConfig(),
        retrieval=RetrievalConfig(),
        encoder=EncoderConfig(kind="hashing"),
        llm=LLMConfig(provider="stub"),
    )


@pytest.fixture(scope="session")
def planted():
    from event_turn_memory.utils.data_generator import create_planted_dataset
    return create_planted_dataset()


@pytest.fixture(scope="session")
def planted_bank(planted):
    """Planted corpus ingested once with the stub provider and the noise encoder."""
    from event_turn_memory.evaluation.benchmark import build_memories

    settings = AppConfig(
        memory=MemoryConfig(),
        retrieval=RetrievalConfig(),
        encoder=EncoderConfig(kind="noise"),
        llm=LLMConfig(provider="stub"),
    )
    return settings, build_memories(planted, settings)
