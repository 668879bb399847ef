"""
ConversationMemory: one conversation's store, ingestor and retriever wired together.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from .config.settings import AppConfig, get_config
from .encoders import Encoder, encoder_from_config
from .ingestion import DialogueTurn, Ingestor
from .llm import LLMGateway, PromptLibrary, provider_from_config
from .llm.providers import Provider
from .llm.usage import UsageLedger
from .retrieval import Retriever, RetrievalTrace
from .store import MemoryStore

logger = logging.getLogger(__name__)


@dataclass
class QueryResult:
    question: str
    category: str
    answer: str
    trace: RetrievalTrace

    @property
    def evidence_ids(self) -> List[int]:
        return self.trace.final.turn_ids


class ConversationMemory:
    """
    Two-level memory for a single conversation.

    Example:
        memory = ConversationMemory()
        memory.add_turn("Evan", "I bought a new Prius yesterday", "8 May, 2023")
        memory.ask("What kind of car does Evan drive?").answer
    """

    def __init__(self, settings: Optional[AppConfig] = None,
                 provider: Optional[Provider] = None,
                 encoder: Optional[Encoder] = None,
                 ledger: Optional[UsageLedger] = None,
                 conversation_id: Optional[str] = None,
                 store: Optional[MemoryStore] = None):
        self.settings = settings or get_config()
        provider = provider or provider_from_config(
            self.settings.llm, overlap_threshold=self.settings.memory.affiliation_overlap
        )
        self.gateway = LLMGateway(provider, PromptLibrary(self.settings.llm.prompts_dir),
                                  retry_limit=self.settings.llm.retry_limit, ledger=ledger)
        if store is None:
            store = MemoryStore(encoder or encoder_from_config(self.settings.encoder),
                                conversation_id=conversation_id)
        self._bind(store)

    def _bind(self, store: MemoryStore):
        self.store = store
        self.ingestor = Ingestor(store, self.gateway, self.settings.memory)
        self.retriever = Retriever(store, self.gateway, self.settings.retrieval)

    @property
    def ledger(self) -> UsageLedger:
        return self.gateway.ledger

    def _next_turn_id(self) -> int:
        order = self.store.ingestion_order
        return order[-1] + 1 if order else 1

    def add_turn(self, speaker: str, text: str, timestamp: str = "",
                 turn_id: Optional[int] = None) -> int:
        if turn_id is None:
            turn_id = self._next_turn_id()
        return self.ingestor.ingest(DialogueTurn(turn_id, speaker, text, timestamp))

    def add_turns(self, turns: Iterable[DialogueTurn], progress: bool = False) -> List[int]:
        return self.ingestor.ingest_all(turns, progress=progress)

    def retrieve(self, question: str, mode: str = "full") -> RetrievalTrace:
        return self.retriever.retrieve_mode(question, mode)

    def ask(self, question: str, category: str = "single_hop",
            distractor: Optional[str] = None, mode: str = "full") -> QueryResult:
        trace = self.retrieve(question, mode)
        answer = self.retriever.answer(question, trace.final.turns, category, distractor)
        return QueryResult(question=question, category=category, answer=answer, trace=trace)

    def save(self, path: Union[str, Path]) -> Path:
        return self.store.snapshot(path)

    @classmethod
    def load(cls, path: Union[str, Path], settings: Optional[AppConfig] = None,
             provider: Optional[Provider] = None,
             ledger: Optional[UsageLedger] = None) -> "ConversationMemory":
        store = MemoryStore.load(path)
        return cls(settings=settings, provider=provider, ledger=ledger, store=store)

    def stats(self):
        return self.store.stats()


def quick_answer(turns: Sequence[Union[DialogueTurn, tuple]], question: str,
                 category: str = "single_hop", distractor: Optional[str] = None,
                 **kwargs) -> str:
    """Ingest ``turns`` into a fresh memory and answer one question."""
    memory = ConversationMemory(**kwargs)
    for position, turn in enumerate(turns, start=1):
        if not isinstance(turn, DialogueTurn):
            speaker, text, *rest = turn
            turn = DialogueTurn(position, speaker, text, rest[0] if rest else "")
        memory.ingestor.ingest(turn)
    return memory.ask(question, category, distractor).answer
