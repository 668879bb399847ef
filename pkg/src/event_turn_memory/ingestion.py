"""
Memory construction: turn analysis, event affiliation and adaptive event updates.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from .config.settings import MemoryConfig
from .exceptions import DuplicateIdError, GatewayError
from .index import Layer
from .llm.gateway import LLMGateway
from .llm.prompts import PromptFamily
from .store import (
    Append,
    EventNode,
    FactSheetEntry,
    FullRefresh,
    MemoryStore,
    Metadata,
    TurnNode,
)
from .utils.logging import memory_logger

logger = logging.getLogger(__name__)

IngestionConfig = MemoryConfig


@dataclass
class DialogueTurn:
    """A turn as it arrives from the conversation."""
    turn_id: int
    speaker: str
    text: str
    timestamp: str = ""

    def __post_init__(self):
        if not self.speaker or not self.text or not self.text.strip():
            raise ValueError(f"turn {self.turn_id} needs a speaker and text")

    def render(self) -> str:
        stamp = f"[{self.timestamp}] " if self.timestamp else ""
        return f"({self.turn_id}) {stamp}{self.speaker}: {self.text}"

    def payload(self) -> Dict[str, Any]:
        return {"turn_id": self.turn_id, "speaker": self.speaker,
                "text": self.text, "timestamp": self.timestamp}


@dataclass
class AffiliationDecision:
    """Either existing events to join or a new event to open."""
    event_ids: List[int] = field(default_factory=list)
    new_event: bool = False
    summary: Optional[str] = None

    @classmethod
    def create(cls, summary: Optional[str] = None) -> "AffiliationDecision":
        return cls(event_ids=[], new_event=True, summary=summary)


@dataclass
class _PlannedEvent:
    summary: str
    fact_sheet: List[FactSheetEntry]


Turn = Union[DialogueTurn, TurnNode]


def _render_block(turns: Iterable[Turn]) -> str:
    return "\n".join(turn.render() for turn in turns)


class Ingestor:
    """
    Builds the two-level memory one turn at a time.

    All LLM calls for a turn happen before the store is touched, so a gateway
    failure leaves the store exactly as it was.
    """

    def __init__(self, store: MemoryStore, gateway: LLMGateway,
                 config: Optional[MemoryConfig] = None):
        self.store = store
        self.gateway = gateway
        self.config = config or MemoryConfig()

    # Turn analysis

    def analysis_window(self) -> List[TurnNode]:
        """The previous min(t-1, m) turns in ingestion order."""
        return self.store.recent_turns(self.config.window_size)

    def analyze_turn(self, turn: DialogueTurn, window: Optional[Sequence[TurnNode]] = None) -> Metadata:
        if window is None:
            window = self.analysis_window()
        window_block = f"Preceding turns:\n{_render_block(window)}\n" if window else ""
        analysis = self.gateway.call(
            PromptFamily.TURN_ANALYSIS,
            {"window": window_block, "turn": turn.render()},
            payload={"turn": turn.payload(), "window": [t.payload() for t in window]},
        )
        return Metadata(
            keywords=list(analysis.keywords),
            tags=list(analysis.tags),
            timestamp=analysis.timestamp or turn.timestamp,
            context=analysis.context,
            source_timestamp=turn.timestamp,
        )

    @staticmethod
    def embedding_text(turn: Turn, metadata: Metadata) -> str:
        return f"{turn.text} {' '.join(metadata.keywords)}".strip()

    # Affiliation

    def candidate_events(self, turn: TurnNode, vector: Optional[np.ndarray] = None) -> List[EventNode]:
        """Top events by cosine against the turn embedding, best first."""
        if vector is None:
            vector = self.store.index.get_vector(Layer.TURN, turn.turn_id)
        hits = self.store.index.top_k(vector, Layer.EVENT, self.config.affiliation_candidates)
        return [self.store.get_event(hit.id) for hit in hits]

    def affiliate(self, turn: TurnNode, candidates: Sequence[EventNode]) -> AffiliationDecision:
        if not candidates:
            return AffiliationDecision.create()

        candidate_ids = [event.event_id for event in candidates]
        try:
            result = self.gateway.call(
                PromptFamily.EVENT_AFFILIATION,
                {
                    "turn": turn.render(),
                    "keywords": ", ".join(turn.metadata.keywords),
                    "candidates": "\n".join(f"({event.event_id}) {event.summary}"
                                            for event in candidates),
                },
                payload={
                    "keywords": list(turn.metadata.keywords),
                    "candidates": [{"event_id": event.event_id, "summary": event.summary}
                                   for event in candidates],
                },
            )
        except GatewayError as e:
            logger.warning(f"Affiliation failed for turn {turn.turn_id}, opening a new event: {e}")
            return AffiliationDecision.create()

        allowed = set(candidate_ids)
        chosen = list(dict.fromkeys(event_id for event_id in result.event_ids if event_id in allowed))
        dropped = sorted(set(result.event_ids) - allowed)
        if dropped:
            logger.warning(f"Turn {turn.turn_id}: dropped non-candidate events {dropped}")

        if chosen:
            return AffiliationDecision(event_ids=chosen)
        return AffiliationDecision.create(result.summary)

    # Event updates

    def _refresh(self, summary: str, turns: Sequence[Turn]) -> _PlannedEvent:
        result = self.gateway.call(
            PromptFamily.EVENT_REFRESH,
            {"summary": summary, "turns": _render_block(turns)},
            payload={"summary": summary, "turns": [turn.payload() for turn in turns]},
        )
        allowed = {turn.turn_id for turn in turns}
        facts = []
        for line in result.facts:
            if line.turn_id not in allowed:
                logger.warning(f"Discarding fact for unlinked turn {line.turn_id}")
                continue
            facts.append(FactSheetEntry(turn_id=line.turn_id, fact=line.fact,
                                        timestamp=line.timestamp))
        return _PlannedEvent(summary=result.summary, fact_sheet=facts)

    def _append(self, event: EventNode, turn: TurnNode) -> FactSheetEntry:
        result = self.gateway.call(
            PromptFamily.FACT_APPEND,
            {"summary": event.summary, "turn": turn.render()},
            payload={"summary": event.summary, "turn": turn.payload()},
        )
        return FactSheetEntry(turn_id=turn.turn_id, fact=result.fact,
                              timestamp=turn.metadata.timestamp or turn.timestamp)

    def plan_updates(self, turn: TurnNode, decision: AffiliationDecision) -> Dict[Optional[int], Any]:
        """
        Run the LLM calls for every affected event without mutating the store.

        Keys are event ids (``None`` for a new event); values are the update
        to apply.
        """
        plan: Dict[Optional[int], Any] = {}
        for event_id in decision.event_ids:
            event = self.store.get_event(event_id)
            if event.volume < self.config.tau:
                linked = [t for t in self.store.linked_turns(event_id) if t.turn_id != turn.turn_id]
                refreshed = self._refresh(event.summary, linked + [turn])
                plan[event_id] = FullRefresh(refreshed.summary, refreshed.fact_sheet)
            else:
                plan[event_id] = Append(self._append(event, turn))
        if decision.new_event:
            plan[None] = self._refresh(decision.summary or "", [turn])
        return plan

    def commit_updates(self, turn: TurnNode, plan: Dict[Optional[int], Any]) -> List[int]:
        """Attach links, apply planned updates and re-embed; returns affected event ids."""
        affected = []
        for event_id, update in plan.items():
            if event_id is None:
                continue
            self.store.attach_link(event_id, turn.turn_id)
            event = self.store.apply_event_update(event_id, update)
            mode = "refresh" if isinstance(update, FullRefresh) else "append"
            memory_logger.log_event_update(event_id, turn.turn_id, mode, event.volume)
            affected.append(event_id)

        if None in plan:
            created: _PlannedEvent = plan[None]
            event_id = self.store.create_event(created.summary, created.fact_sheet, [turn.turn_id])
            memory_logger.log_event_update(event_id, turn.turn_id, "create", 1)
            affected.append(event_id)

        self.store.refresh_embeddings()
        return affected

    def update_affiliated_events(self, turn: TurnNode, decision: AffiliationDecision) -> List[int]:
        return self.commit_updates(turn, self.plan_updates(turn, decision))

    # Orchestration

    def ingest(self, dialogue_turn: DialogueTurn) -> int:
        """Analyse, store, affiliate and link one turn; returns its id."""
        turn_id = dialogue_turn.turn_id
        if self.store.has_turn(turn_id):
            raise DuplicateIdError("turn", turn_id)
        order = self.store.ingestion_order
        if order and turn_id <= order[-1]:
            raise ValueError(f"turn ids must increase: {turn_id} after {order[-1]}")

        metadata = self.analyze_turn(dialogue_turn)
        node = TurnNode(turn_id=turn_id, speaker=dialogue_turn.speaker, text=dialogue_turn.text,
                        timestamp=dialogue_turn.timestamp, metadata=metadata)
        vector = self.store.encoder.encode(self.embedding_text(node, metadata))

        candidates = self.candidate_events(node, vector=vector)
        decision = self.affiliate(node, candidates)
        plan = self.plan_updates(node, decision)

        node.embedding_id = self.store.embed_turn(turn_id, "", vector=vector)
        self.store.insert_turn(node)
        affected = self.commit_updates(node, plan)

        memory_logger.log_ingest_turn(self.store.conversation_id, turn_id,
                                      len(metadata.keywords), len(decision.event_ids),
                                      decision.new_event)
        logger.debug(f"Turn {turn_id} linked to events {affected}")
        return turn_id

    def ingest_all(self, turns: Iterable[DialogueTurn], progress: bool = False) -> List[int]:
        turns = list(turns)
        iterator = tqdm(turns, desc="Ingesting", unit="turn", disable=not progress)
        return [self.ingest(turn) for turn in iterator]
