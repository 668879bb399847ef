"""
Conversation datasets: JSON loading with located errors, saving, and LoCoMo conversion.

File layout::

    {
      "conversations": [
        {"conversation_id": "c1",
         "turns": [{"turn_id": 1, "speaker": "Evan", "timestamp": "...", "text": "..."}]}
      ],
      "questions": [
        {"question_id": "q1", "conversation_id": "c1", "category": "single_hop",
         "question": "...", "gold_answer": "...", "gold_evidence": [1],
         "distractor": null}
      ]
    }
"""
import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from ..exceptions import DatasetIntegrityError, DatasetParseError
from ..ingestion import DialogueTurn
from ..llm.prompts import NOT_MENTIONED

logger = logging.getLogger(__name__)

Category = Literal["single_hop", "multi_hop", "temporal", "open_domain", "adversarial"]

LOCOMO_CATEGORIES = {
    1: "multi_hop",
    2: "temporal",
    3: "open_domain",
    4: "single_hop",
    5: "adversarial",
}

_SESSION_KEY = re.compile(r"^session_(\d+)$")


class TurnRecord(BaseModel):
    turn_id: int
    speaker: str = Field(min_length=1)
    text: str = Field(min_length=1)
    timestamp: str = ""

    def to_dialogue_turn(self) -> DialogueTurn:
        return DialogueTurn(self.turn_id, self.speaker, self.text, self.timestamp)


class Conversation(BaseModel):
    conversation_id: str = Field(min_length=1)
    turns: List[TurnRecord] = Field(default_factory=list)

    def dialogue_turns(self) -> List[DialogueTurn]:
        return [turn.to_dialogue_turn() for turn in self.turns]


class Question(BaseModel):
    question_id: str = Field(min_length=1)
    conversation_id: str
    category: Category
    question: str = Field(min_length=1)
    gold_answer: str
    gold_evidence: List[int] = Field(default_factory=list)
    distractor: Optional[str] = None

    @model_validator(mode="after")
    def _adversarial_needs_distractor(self) -> "Question":
        if self.category == "adversarial" and not self.distractor:
            raise ValueError("adversarial questions need a distractor")
        return self


class ConversationDataset(BaseModel):
    conversations: List[Conversation] = Field(default_factory=list)
    questions: List[Question] = Field(default_factory=list)

    def conversation(self, conversation_id: str) -> Conversation:
        for conversation in self.conversations:
            if conversation.conversation_id == conversation_id:
                return conversation
        raise KeyError(conversation_id)

    def questions_for(self, conversation_id: str) -> List[Question]:
        return [q for q in self.questions if q.conversation_id == conversation_id]

    @property
    def mean_turns(self) -> float:
        if not self.conversations:
            return 0.0
        return sum(len(c.turns) for c in self.conversations) / len(self.conversations)

    def check_integrity(self) -> "ConversationDataset":
        """Raise DatasetIntegrityError on the first broken reference."""
        turn_ids: Dict[str, set] = {}
        for conversation in self.conversations:
            if conversation.conversation_id in turn_ids:
                raise DatasetIntegrityError("duplicate conversation id", conversation.conversation_id)
            previous = None
            for turn in conversation.turns:
                if previous is not None and turn.turn_id <= previous:
                    raise DatasetIntegrityError(
                        f"turn ids must increase within conversation "
                        f"{conversation.conversation_id}", turn.turn_id)
                previous = turn.turn_id
            turn_ids[conversation.conversation_id] = {turn.turn_id for turn in conversation.turns}

        seen = set()
        for question in self.questions:
            if question.question_id in seen:
                raise DatasetIntegrityError("duplicate question id", question.question_id)
            seen.add(question.question_id)
            known = turn_ids.get(question.conversation_id)
            if known is None:
                raise DatasetIntegrityError(
                    f"question {question.question_id} names an unknown conversation",
                    question.conversation_id)
            for turn_id in question.gold_evidence:
                if turn_id not in known:
                    raise DatasetIntegrityError(
                        f"question {question.question_id} cites a missing gold evidence turn",
                        turn_id)
        return self


def _location(error: Mapping[str, Any]) -> str:
    path = ""
    for part in error["loc"]:
        path += f"[{part}]" if isinstance(part, int) else (f".{part}" if path else str(part))
    return path or "<root>"


def parse_dataset(data: Any, source: str = "<data>") -> ConversationDataset:
    """Validate an already-decoded dataset object."""
    try:
        dataset = ConversationDataset.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise DatasetParseError(first["msg"], f"{source}: {_location(first)}") from e
    return dataset.check_integrity()


def load_dataset(path: Union[str, Path]) -> ConversationDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetParseError(e.msg, f"{path}: line {e.lineno}, column {e.colno}") from e

    dataset = parse_dataset(data, str(path))
    logger.info(f"Loaded {len(dataset.conversations)} conversations and "
                f"{len(dataset.questions)} questions from {path}")
    return dataset


def save_dataset(dataset: ConversationDataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(dataset.model_dump(), indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")
    return path


def convert_locomo(raw: Union[Mapping[str, Any], List[Mapping[str, Any]]]) -> ConversationDataset:
    """
    Convert LoCoMo release JSON (one sample or a list of samples).

    Turn ids follow session order from 1; ``dia_id`` references in the
    evidence lists are mapped onto them.
    """
    samples = [raw] if isinstance(raw, Mapping) else list(raw)
    conversations, questions = [], []

    for position, sample in enumerate(samples):
        conversation_id = str(sample.get("sample_id", f"conv-{position + 1}"))
        dialogue = sample.get("conversation")
        if not isinstance(dialogue, Mapping):
            raise DatasetParseError("missing conversation object", f"[{position}].conversation")

        sessions = sorted(
            (int(match.group(1)), key) for key in dialogue
            if (match := _SESSION_KEY.match(key))
        )
        turns, by_dia_id = [], {}
        for number, key in sessions:
            session_time = dialogue.get(f"session_{number}_date_time", "")
            for entry in dialogue[key]:
                turn_id = len(turns) + 1
                turns.append(TurnRecord(turn_id=turn_id, speaker=entry["speaker"],
                                        text=entry["text"], timestamp=session_time))
                by_dia_id[entry.get("dia_id")] = turn_id
        conversations.append(Conversation(conversation_id=conversation_id, turns=turns))

        for index, qa in enumerate(sample.get("qa", [])):
            category = LOCOMO_CATEGORIES.get(qa.get("category"))
            if category is None:
                raise DatasetParseError(f"unknown category {qa.get('category')!r}",
                                        f"[{position}].qa[{index}].category")
            evidence = []
            for dia_id in qa.get("evidence", []):
                if dia_id in by_dia_id:
                    evidence.append(by_dia_id[dia_id])
                else:
                    logger.warning(f"{conversation_id} qa[{index}]: dropping unknown evidence {dia_id!r}")

            if category == "adversarial":
                gold = NOT_MENTIONED
                distractor = str(qa.get("adversarial_answer") or qa.get("answer") or "")
                if not distractor:
                    logger.warning(f"{conversation_id} qa[{index}]: adversarial item without a "
                                   f"candidate answer skipped")
                    continue
            else:
                gold = str(qa.get("answer", ""))
                distractor = None
            questions.append(Question(
                question_id=f"{conversation_id}-q{index + 1}",
                conversation_id=conversation_id,
                category=category,
                question=qa["question"],
                gold_answer=gold,
                gold_evidence=sorted(set(evidence)),
                distractor=distractor or None,
            ))

    return ConversationDataset(conversations=conversations, questions=questions).check_integrity()
