"""
Two-level memory store: turn nodes, event nodes and the links between them.
"""
import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Union

import joblib

from .encoders import Encoder, HashingEncoder, build_encoder
from .exceptions import (
    DuplicateIdError,
    EmptyEventError,
    SnapshotFormatError,
    UnknownIdError,
)
from .index import EmbeddingIndex, Layer

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "event-turn-memory"
SNAPSHOT_VERSION = 1


@dataclass
class Metadata:
    """LLM-extracted description of one turn."""
    keywords: List[str]
    tags: List[str] = field(default_factory=list)
    timestamp: str = ""
    context: str = ""
    source_timestamp: str = ""  # verbatim dataset timestamp

    def to_dict(self) -> Dict[str, Any]:
        return {"keywords": list(self.keywords), "tags": list(self.tags),
                "timestamp": self.timestamp, "context": self.context,
                "source_timestamp": self.source_timestamp}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Metadata":
        return cls(**data)


@dataclass
class TurnNode:
    """Raw dialogue turn plus metadata; the finest evidence unit."""
    turn_id: int
    speaker: str
    text: str
    timestamp: str
    metadata: Metadata
    embedding_id: Optional[str] = None
    event_ids: Set[int] = field(default_factory=set)

    def render(self) -> str:
        """One-line form used inside prompts."""
        stamp = f"[{self.timestamp}] " if self.timestamp else ""
        return f"({self.turn_id}) {stamp}{self.speaker}: {self.text}"

    def payload(self) -> Dict[str, Any]:
        return {"turn_id": self.turn_id, "speaker": self.speaker,
                "text": self.text, "timestamp": self.timestamp}

    def to_dict(self) -> Dict[str, Any]:
        return {"turn_id": self.turn_id, "speaker": self.speaker, "text": self.text,
                "timestamp": self.timestamp, "metadata": self.metadata.to_dict(),
                "embedding_id": self.embedding_id, "event_ids": sorted(self.event_ids)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TurnNode":
        return cls(turn_id=data["turn_id"], speaker=data["speaker"], text=data["text"],
                   timestamp=data["timestamp"], metadata=Metadata.from_dict(data["metadata"]),
                   embedding_id=data["embedding_id"], event_ids=set(data["event_ids"]))


@dataclass
class FactSheetEntry:
    turn_id: int
    fact: str
    timestamp: str = ""

    def __post_init__(self):
        if not self.fact or not self.fact.strip():
            raise ValueError("fact sheet entries need a non-empty fact")

    def render(self) -> str:
        return f"[{self.timestamp}] {self.fact}" if self.timestamp else self.fact

    def to_tuple(self):
        return (self.turn_id, self.timestamp, self.fact)


@dataclass
class EventNode:
    """Thematic group of turns with a summary and a fact sheet."""
    event_id: int
    summary: str
    fact_sheet: List[FactSheetEntry] = field(default_factory=list)
    link_set: List[int] = field(default_factory=list)
    embedding_id: Optional[str] = None
    stale: bool = False

    @property
    def volume(self) -> int:
        return len(self.link_set)

    def embedding_text(self) -> str:
        """Summary followed by the fact lines; re-encoded after every update."""
        lines = [self.summary] + [entry.render() for entry in self.fact_sheet]
        return "\n".join(line for line in lines if line)

    def to_dict(self) -> Dict[str, Any]:
        return {"event_id": self.event_id, "summary": self.summary,
                "fact_sheet": [entry.to_tuple() for entry in self.fact_sheet],
                "link_set": list(self.link_set), "embedding_id": self.embedding_id,
                "stale": self.stale}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EventNode":
        return cls(event_id=data["event_id"], summary=data["summary"],
                   fact_sheet=[FactSheetEntry(turn_id=t, timestamp=ts, fact=f)
                               for t, ts, f in data["fact_sheet"]],
                   link_set=list(data["link_set"]), embedding_id=data["embedding_id"],
                   stale=data["stale"])


@dataclass
class FullRefresh:
    summary: str
    fact_sheet: List[FactSheetEntry]


@dataclass
class Append:
    entry: FactSheetEntry


EventUpdate = Union[FullRefresh, Append]


class MemoryStore:
    """
    Owns the turn layer, the event layer and their embeddings.

    Single writer, many readers: ingestion mutates, retrieval only reads.
    """

    def __init__(self, encoder: Optional[Encoder] = None, conversation_id: Optional[str] = None):
        self.encoder = encoder or HashingEncoder()
        self.conversation_id = conversation_id
        self.index = EmbeddingIndex(self.encoder)
        self.turns: Dict[int, TurnNode] = {}
        self.events: Dict[int, EventNode] = {}
        self.ingestion_order: List[int] = []
        self._positions: Dict[int, int] = {}
        self._next_event_id = 1

    # Turn layer

    def has_turn(self, turn_id: int) -> bool:
        return turn_id in self.turns

    def get_turn(self, turn_id: int) -> TurnNode:
        try:
            return self.turns[turn_id]
        except KeyError:
            raise UnknownIdError("turn", turn_id) from None

    def embed_turn(self, turn_id: int, text: str, vector=None) -> str:
        """Register the turn embedding; ``vector`` skips re-encoding ``text``."""
        if turn_id in self.turns:
            raise DuplicateIdError("turn", turn_id)
        if vector is None:
            return self.index.encode_and_register(text, Layer.TURN, turn_id)
        return self.index.register(Layer.TURN, turn_id, vector)

    def insert_turn(self, node: TurnNode) -> int:
        if node.turn_id in self.turns:
            raise DuplicateIdError("turn", node.turn_id)
        if node.metadata is None:
            raise ValueError("turns are stored with metadata")
        if self.ingestion_order and node.turn_id <= self.ingestion_order[-1]:
            raise ValueError(
                f"turn ids must increase: {node.turn_id} after {self.ingestion_order[-1]}"
            )
        self.turns[node.turn_id] = node
        self._positions[node.turn_id] = len(self.ingestion_order)
        self.ingestion_order.append(node.turn_id)
        return node.turn_id

    def recent_turns(self, count: int) -> List[TurnNode]:
        """The last ``count`` turns in ingestion order."""
        if count <= 0:
            return []
        return [self.turns[turn_id] for turn_id in self.ingestion_order[-count:]]

    # Event layer

    def get_event(self, event_id: int) -> EventNode:
        try:
            return self.events[event_id]
        except KeyError:
            raise UnknownIdError("event", event_id) from None

    def _check_facts(self, event: EventNode, entries: Sequence[FactSheetEntry]):
        linked = set(event.link_set)
        for entry in entries:
            if entry.turn_id not in linked:
                raise UnknownIdError("linked turn", entry.turn_id)

    def create_event(self, summary: str, fact_sheet: Sequence[FactSheetEntry],
                     initial_turn_ids: Sequence[int]) -> int:
        turn_ids = list(dict.fromkeys(initial_turn_ids))
        if not turn_ids:
            raise EmptyEventError()
        for turn_id in turn_ids:
            self.get_turn(turn_id)

        event = EventNode(event_id=self._next_event_id, summary=summary,
                          link_set=sorted(turn_ids, key=self._positions.__getitem__))
        self._check_facts(event, fact_sheet)
        event.fact_sheet = list(fact_sheet)

        event.embedding_id = self.index.encode_and_register(
            event.embedding_text(), Layer.EVENT, event.event_id
        )
        self.events[event.event_id] = event
        self._next_event_id += 1
        for turn_id in turn_ids:
            self.turns[turn_id].event_ids.add(event.event_id)
        return event.event_id

    def attach_link(self, event_id: int, turn_id: int) -> EventNode:
        """Link event and turn in both directions; idempotent."""
        event = self.get_event(event_id)
        turn = self.get_turn(turn_id)
        if turn_id not in event.link_set:
            event.link_set.append(turn_id)
            if len(event.link_set) > 1 and \
                    self._positions[event.link_set[-2]] > self._positions[turn_id]:
                event.link_set.sort(key=self._positions.__getitem__)
        turn.event_ids.add(event_id)
        return event

    def linked_turns(self, event_id: int) -> List[TurnNode]:
        return [self.turns[turn_id] for turn_id in self.get_event(event_id).link_set]

    def apply_event_update(self, event_id: int, update: EventUpdate) -> EventNode:
        event = self.get_event(event_id)
        if isinstance(update, FullRefresh):
            self._check_facts(event, update.fact_sheet)
            event.summary = update.summary
            event.fact_sheet = list(update.fact_sheet)
        elif isinstance(update, Append):
            self._check_facts(event, [update.entry])
            event.fact_sheet.append(update.entry)
        else:
            raise TypeError(f"unsupported event update {type(update).__name__}")
        event.stale = True
        return event

    def refresh_embeddings(self) -> int:
        """Re-encode every stale event; returns how many were refreshed."""
        refreshed = 0
        for event in self.events.values():
            if event.stale:
                self.index.replace(Layer.EVENT, event.event_id, event.embedding_text())
                event.stale = False
                refreshed += 1
        return refreshed

    # Persistence

    def _state(self) -> Dict[str, Any]:
        return {
            "header": {
                "format": SNAPSHOT_FORMAT,
                "version": SNAPSHOT_VERSION,
                "dimension": self.encoder.dimension,
                "encoder": self.encoder.describe(),
                "conversation_id": self.conversation_id,
            },
            "turns": [self.turns[turn_id].to_dict() for turn_id in self.ingestion_order],
            "events": [event.to_dict() for event in self.events.values()],
            "next_event_id": self._next_event_id,
            "embeddings": self.index.export_state(),
        }

    def snapshot(self, path: Union[str, Path]) -> Path:
        """Write a versioned snapshot; returns the path written."""
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        joblib.dump(self._state(), path)
        logger.debug(f"Snapshot written to {path}")
        return path

    def serialized_bytes(self) -> int:
        buffer = io.BytesIO()
        joblib.dump(self._state(), buffer)
        return buffer.getbuffer().nbytes

    @staticmethod
    def read_header(path: Union[str, Path]) -> Dict[str, Any]:
        return MemoryStore._read_state(path)["header"]

    @staticmethod
    def _read_state(path: Union[str, Path]) -> Dict[str, Any]:
        if not os.path.exists(path):
            raise FileNotFoundError(f"snapshot not found: {path}")
        try:
            state = joblib.load(path)
        except Exception as e:
            raise SnapshotFormatError(f"cannot read snapshot {path}: {e}") from e

        header = state.get("header") if isinstance(state, dict) else None
        if not isinstance(header, dict) or header.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotFormatError(f"{path} is not an event-turn-memory snapshot")
        if header.get("version") != SNAPSHOT_VERSION:
            raise SnapshotFormatError(
                f"snapshot version {header.get('version')} is not supported "
                f"(expected {SNAPSHOT_VERSION})"
            )
        return state

    @classmethod
    def load(cls, path: Union[str, Path], encoder: Optional[Encoder] = None) -> "MemoryStore":
        state = cls._read_state(path)
        header = state["header"]
        if encoder is None:
            encoder = build_encoder(header["encoder"])
        elif encoder.dimension != header["dimension"]:
            raise SnapshotFormatError(
                f"snapshot dimension {header['dimension']} does not match encoder "
                f"dimension {encoder.dimension}"
            )

        store = cls(encoder=encoder, conversation_id=header.get("conversation_id"))
        try:
            for data in state["turns"]:
                turn = TurnNode.from_dict(data)
                store.turns[turn.turn_id] = turn
                store._positions[turn.turn_id] = len(store.ingestion_order)
                store.ingestion_order.append(turn.turn_id)
            for data in state["events"]:
                event = EventNode.from_dict(data)
                store.events[event.event_id] = event
            store._next_event_id = state["next_event_id"]
            store.index.import_state(state["embeddings"])
        except (KeyError, TypeError, ValueError) as e:
            raise SnapshotFormatError(f"malformed snapshot {path}: {e}") from e
        return store

    def restore_from(self, path: Union[str, Path]):
        """Replace this store's contents from a snapshot; untouched on failure."""
        loaded = self.load(path, encoder=self.encoder)
        self.__dict__.update(loaded.__dict__)

    def stats(self) -> Dict[str, int]:
        return {
            "turn_count": len(self.turns),
            "event_count": len(self.events),
            "link_count": sum(event.volume for event in self.events.values()),
            "serialized_bytes": self.serialized_bytes(),
        }

    def check_links(self) -> List[str]:
        """Violations of link bidirectionality and volume invariants (empty when sound)."""
        problems = []
        from_events = {(e.event_id, t) for e in self.events.values() for t in e.link_set}
        from_turns = {(e, t.turn_id) for t in self.turns.values() for e in t.event_ids}
        for event_id, turn_id in sorted(from_events - from_turns):
            problems.append(f"event {event_id} links turn {turn_id} but not vice versa")
        for event_id, turn_id in sorted(from_turns - from_events):
            problems.append(f"turn {turn_id} names event {event_id} but is not linked")
        for event in self.events.values():
            if len(set(event.link_set)) != len(event.link_set):
                problems.append(f"event {event.event_id} has duplicate links")
            missing = [t for t in event.link_set if t not in self.turns]
            if missing:
                problems.append(f"event {event.event_id} links missing turns {missing}")
        return problems

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MemoryStore):
            return NotImplemented
        return (
            self.conversation_id == other.conversation_id
            and self.ingestion_order == other.ingestion_order
            and self.turns == other.turns
            and self.events == other.events
            and self._next_event_id == other._next_event_id
            and self.encoder.describe() == other.encoder.describe()
            and self.index.state_equals(other.index)
        )

    __hash__ = None
