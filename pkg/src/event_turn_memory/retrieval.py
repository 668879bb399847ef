"""
LLM-guided retrieval over the two-level memory.

Full mode runs keyword extraction, dual-layer semantic search, event-anchored
turn prediction, merge and evidence filtering. Single-layer modes search the
turn layer only and exist as baselines.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .config.settings import RetrievalConfig
from .exceptions import GatewayError, MemoryEngineError
from .index import Layer
from .llm.gateway import LLMGateway
from .llm.prompts import CATEGORIES, NOT_MENTIONED, PromptFamily
from .store import EventNode, MemoryStore, TurnNode
from .utils.logging import memory_logger
from .utils.text import content_tokens, tokenize

logger = logging.getLogger(__name__)

MODES = ("full", "no-hierarchy", "flat", "vector")
NO_EVIDENCE = "(no evidence retrieved)"


class Provenance(str, Enum):
    SEMANTIC = "semantic"
    PREDICTED = "predicted"
    BOTH = "both"
    FLAT = "flat"


@dataclass(frozen=True)
class EvidenceItem:
    turn: TurnNode
    provenance: Provenance

    @property
    def turn_id(self) -> int:
        return self.turn.turn_id


@dataclass
class EvidenceSet:
    """Duplicate-free evidence in chronological turn order."""
    items: List[EvidenceItem] = field(default_factory=list)

    def __post_init__(self):
        unique = {item.turn_id: item for item in self.items}
        self.items = [unique[turn_id] for turn_id in sorted(unique)]

    @classmethod
    def from_turns(cls, turns: Sequence[TurnNode], provenance: Provenance) -> "EvidenceSet":
        return cls([EvidenceItem(turn, provenance) for turn in turns])

    @property
    def turn_ids(self) -> List[int]:
        return [item.turn_id for item in self.items]

    @property
    def turns(self) -> List[TurnNode]:
        return [item.turn for item in self.items]

    def provenance(self, turn_id: int) -> Provenance:
        for item in self.items:
            if item.turn_id == turn_id:
                return item.provenance
        raise KeyError(turn_id)

    def subset(self, turn_ids) -> "EvidenceSet":
        keep = set(turn_ids)
        return EvidenceSet([item for item in self.items if item.turn_id in keep])

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[EvidenceItem]:
        return iter(self.items)

    def __contains__(self, turn_id: object) -> bool:
        return turn_id in set(self.turn_ids)


@dataclass
class RetrievalTrace:
    """Everything one query touched, for evaluation and invariant checks."""
    question: str
    mode: str
    keywords: List[str]
    semantic: List[int] = field(default_factory=list)
    events: List[int] = field(default_factory=list)
    predicted: List[int] = field(default_factory=list)
    candidates: EvidenceSet = field(default_factory=EvidenceSet)
    final: EvidenceSet = field(default_factory=EvidenceSet)
    ranked: List[int] = field(default_factory=list)  # score order, best first

    def to_dict(self) -> Dict[str, object]:
        return {
            "mode": self.mode,
            "keywords": list(self.keywords),
            "semantic": list(self.semantic),
            "events": list(self.events),
            "predicted": list(self.predicted),
            "candidates": self.candidates.turn_ids,
            "final": self.final.turn_ids,
        }


def _fallback_keywords(question: str) -> List[str]:
    return content_tokens(question) or tokenize(question)


class Retriever:
    """Read-only query pipeline over a populated store."""

    def __init__(self, store: MemoryStore, gateway: LLMGateway,
                 config: Optional[RetrievalConfig] = None):
        self.store = store
        self.gateway = gateway
        self.config = config or RetrievalConfig()

    # Keywords and semantic search

    def extract_keywords(self, question: str) -> List[str]:
        if not question or not question.strip():
            raise ValueError("question must not be empty")
        try:
            result = self.gateway.call(PromptFamily.QUERY_KEYWORDS, {"question": question},
                                       payload={"question": question})
            keywords = [keyword.strip() for keyword in result.keywords if keyword.strip()]
        except GatewayError as e:
            logger.warning(f"Keyword extraction failed, using question tokens: {e}")
            return _fallback_keywords(question)
        if not keywords:
            logger.warning("Keyword extraction returned nothing, using question tokens")
            return _fallback_keywords(question)
        return keywords

    def _query_vector(self, keywords: Sequence[str]):
        return self.store.encoder.encode(" ".join(keywords))

    def semantic_retrieve(self, keywords: Sequence[str]) -> Tuple[List[TurnNode], List[EventNode]]:
        """Top k_turn turns and top k_event events for the joined keywords."""
        vector = self._query_vector(keywords)
        index = self.store.index
        turns = [self.store.get_turn(hit.id)
                 for hit in index.top_k(vector, Layer.TURN, self.config.k_turn)]
        events = [self.store.get_event(hit.id)
                  for hit in index.top_k(vector, Layer.EVENT, self.config.k_event)]
        return turns, events

    # Event-anchored prediction

    def predict(self, question: str, event: EventNode,
                keywords: Optional[Sequence[str]] = None) -> List[TurnNode]:
        """Linked turns of ``event`` the LLM selects as worth reading."""
        keywords = list(keywords) if keywords is not None else _fallback_keywords(question)
        linked = self.store.linked_turns(event.event_id)
        size = self.config.predict_batch_size
        selected: List[int] = []

        for start in range(0, len(linked), size):
            batch = linked[start:start + size]
            try:
                result = self.gateway.call(
                    PromptFamily.EVENT_LOCAL_SELECTION,
                    {"question": question, "summary": event.summary,
                     "turns": "\n".join(turn.render() for turn in batch)},
                    payload={"question": question, "keywords": keywords,
                             "summary": event.summary,
                             "turns": [turn.payload() for turn in batch]},
                )
            except GatewayError as e:
                logger.warning(f"Turn prediction failed for event {event.event_id}: {e}")
                return []

            allowed = {turn.turn_id for turn in batch}
            foreign = sorted(set(result.turn_ids) - allowed)
            if foreign:
                logger.warning(f"Event {event.event_id}: dropped foreign turn ids {foreign}")
            selected.extend(turn_id for turn_id in result.turn_ids if turn_id in allowed)

        chosen = set(selected)
        return [turn for turn in linked if turn.turn_id in chosen]

    def merge(self, semantic: Sequence[TurnNode], predicted: Sequence[TurnNode]) -> EvidenceSet:
        semantic_ids = {turn.turn_id for turn in semantic}
        predicted_ids = {turn.turn_id for turn in predicted}
        items = {}
        for turn in list(semantic) + list(predicted):
            if turn.turn_id in semantic_ids and turn.turn_id in predicted_ids:
                provenance = Provenance.BOTH
            elif turn.turn_id in semantic_ids:
                provenance = Provenance.SEMANTIC
            else:
                provenance = Provenance.PREDICTED
            items[turn.turn_id] = EvidenceItem(turn, provenance)
        return EvidenceSet(list(items.values()))

    # Filtering

    def filter(self, question: str, candidates: EvidenceSet,
               keywords: Optional[Sequence[str]] = None,
               fallback: Optional[Sequence[int]] = None) -> EvidenceSet:
        """
        Keep the candidates the LLM judges relevant; never adds turns.

        On gateway failure the ``fallback`` ids are kept (by default the
        semantically retrieved candidates).
        """
        if not len(candidates):
            return EvidenceSet()
        keywords = list(keywords) if keywords is not None else _fallback_keywords(question)
        try:
            result = self.gateway.call(
                PromptFamily.EVIDENCE_FILTER,
                {"question": question,
                 "candidates": "\n".join(turn.render() for turn in candidates.turns)},
                payload={"question": question, "keywords": keywords,
                         "candidates": [turn.payload() for turn in candidates.turns]},
            )
        except GatewayError as e:
            logger.warning(f"Evidence filter failed, keeping semantic candidates: {e}")
            if fallback is None:
                fallback = [item.turn_id for item in candidates
                            if item.provenance is not Provenance.PREDICTED]
            return candidates.subset(fallback)

        extras = sorted(set(result.turn_ids) - set(candidates.turn_ids))
        if extras:
            logger.warning(f"Evidence filter returned ids outside the candidates: {extras}")
        return candidates.subset(result.turn_ids)

    # Answering

    def answer(self, question: str, evidence: Sequence[TurnNode], category: str,
               distractor: Optional[str] = None) -> str:
        if category not in CATEGORIES:
            raise ValueError(f"unknown question category {category!r}")
        if category == "adversarial" and not distractor:
            raise ValueError("adversarial questions need a distractor candidate")

        ordered = sorted(evidence, key=lambda turn: turn.turn_id)
        keywords = _fallback_keywords(question)
        variables = {
            "question": question,
            "evidence": "\n".join(turn.render() for turn in ordered) or NO_EVIDENCE,
        }
        if category == "adversarial":
            variables["distractor"] = distractor
        result = self.gateway.call(
            PromptFamily.FINAL_QA, variables,
            payload={"question": question, "keywords": keywords,
                     "evidence": [turn.payload() for turn in ordered],
                     "distractor": distractor},
            category=category,
        )
        answer = result.answer.strip()
        if category == "adversarial":
            return self._constrain_adversarial(answer, distractor)
        return answer

    @staticmethod
    def _constrain_adversarial(answer: str, distractor: str) -> str:
        if answer == distractor or answer == NOT_MENTIONED:
            return answer
        if distractor.lower() in answer.lower() and "not mentioned" not in answer.lower():
            return distractor
        if answer.lower() != NOT_MENTIONED.lower():
            logger.warning(f"Adversarial answer {answer!r} is neither option, "
                           f"treating it as not mentioned")
        return NOT_MENTIONED

    # Pipelines

    def retrieve(self, question: str) -> RetrievalTrace:
        """Hierarchical retrieval; falls back to flat search when the hierarchy is disabled."""
        if not self.config.hierarchy_enabled:
            return self.retrieve_flat(question)

        keywords = self.extract_keywords(question)
        semantic, events = self.semantic_retrieve(keywords)
        predicted: Dict[int, TurnNode] = {}
        for event in events:
            for turn in self.predict(question, event, keywords):
                predicted.setdefault(turn.turn_id, turn)
        predicted_turns = [predicted[turn_id] for turn_id in sorted(predicted)]

        candidates = self.merge(semantic, predicted_turns)
        final = self.filter(question, candidates, keywords,
                            fallback=[turn.turn_id for turn in semantic])
        trace = RetrievalTrace(
            question=question, mode="full", keywords=keywords,
            semantic=[turn.turn_id for turn in semantic],
            events=[event.event_id for event in events],
            predicted=[turn.turn_id for turn in predicted_turns],
            candidates=candidates, final=final,
            ranked=[turn.turn_id for turn in semantic],
        )
        self.check_subset_chain(trace)
        memory_logger.log_retrieval(len(semantic), len(predicted_turns), len(candidates),
                                    len(final), mode="full")
        return trace

    def retrieve_flat(self, question: str, top_n: Optional[int] = None,
                      use_filter: bool = True, mode: str = "flat") -> RetrievalTrace:
        """Single-layer top-n turns, optionally filtered; never consults events."""
        top_n = top_n or self.config.flat_top_n
        keywords = self.extract_keywords(question)
        hits = self.store.index.top_k(self._query_vector(keywords), Layer.TURN, top_n)
        turns = [self.store.get_turn(hit.id) for hit in hits]
        candidates = EvidenceSet.from_turns(turns, Provenance.FLAT)
        final = self.filter(question, candidates, keywords) if use_filter else candidates
        trace = RetrievalTrace(
            question=question, mode=mode, keywords=keywords,
            semantic=[turn.turn_id for turn in turns],
            candidates=candidates, final=final,
            ranked=[hit.id for hit in hits],
        )
        self.check_subset_chain(trace)
        memory_logger.log_retrieval(len(turns), 0, len(candidates), len(final), mode=mode)
        return trace

    def retrieve_mode(self, question: str, mode: str = "full") -> RetrievalTrace:
        if mode == "full":
            return self.retrieve(question)
        if mode == "no-hierarchy":
            return self.retrieve_flat(question, top_n=self.config.k_turn + self.config.k_event,
                                      mode=mode)
        if mode == "flat":
            return self.retrieve_flat(question, mode=mode)
        if mode == "vector":
            return self.retrieve_flat(question, use_filter=False, mode=mode)
        raise ValueError(f"unknown retrieval mode {mode!r}; expected one of {MODES}")

    def check_subset_chain(self, trace: RetrievalTrace) -> None:
        """Raise when final ⊄ candidates, candidates ≠ semantic ∪ predicted, or a prediction escaped its events."""
        problems = []
        candidate_ids = set(trace.candidates.turn_ids)
        if not set(trace.final.turn_ids) <= candidate_ids:
            problems.append("final evidence is not a subset of the candidates")
        if candidate_ids != set(trace.semantic) | set(trace.predicted):
            problems.append("candidates differ from semantic ∪ predicted")
        reachable = set()
        for event_id in trace.events:
            reachable.update(self.store.get_event(event_id).link_set)
        if not set(trace.predicted) <= reachable:
            problems.append("predicted turns outside the retrieved events")
        if problems:
            raise MemoryEngineError(f"retrieval invariant violated: {'; '.join(problems)}")
