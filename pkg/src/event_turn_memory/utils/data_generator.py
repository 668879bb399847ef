"""
Synthetic conversation data for tests, ablations and the scaling harness.
"""
from datetime import date, timedelta
from typing import List, Optional, Set

import numpy as np

from ..evaluation.dataset import Conversation, ConversationDataset, Question, TurnRecord
from ..ingestion import DialogueTurn
from ..llm.prompts import CATEGORIES, NOT_MENTIONED
from .text import STOPWORDS

_CONSONANTS = list("bdfgklmnprstvz")
_VOWELS = list("aeiou")

# Frames use stopwords only, so every content token of a turn is planted.
_FRAMES = [
    "I was with {a0} and {a1} when {p} and then {q} were there",
    "So we did {a0} at the {a1} and it was all about {p} and {q}",
    "Then it was {a0} with {a1} again, just {p} and {q} too",
    "Were you at {a0} for {a1}? It was {p} before {q}",
]
_WEEKEND = " over the weekend"
_RESERVED = {"weekend"}

SPEAKERS = ("Caroline", "Melanie")


def pseudo_words(rng: np.random.Generator, count: int, exclude: Optional[Set[str]] = None,
                 syllables: int = 3) -> List[str]:
    """Distinct pronounceable non-words, none of them stopwords."""
    taken = set(exclude or ()) | STOPWORDS | _RESERVED
    result = []
    while len(result) < count:
        word = "".join(str(rng.choice(_CONSONANTS)) + str(rng.choice(_VOWELS))
                       for _ in range(syllables))
        if word in taken:
            continue
        taken.add(word)
        result.append(word)
    return result


def session_timestamp(group: int, start: date = date(2023, 5, 8)) -> str:
    """LoCoMo-style session stamp, one week apart per group."""
    day = start + timedelta(days=7 * group)
    hour = 1 + (group * 5) % 12
    minute = (group * 17) % 60
    meridiem = "pm" if group % 2 == 0 else "am"
    return f"{hour}:{minute:02d} {meridiem} on {day.day} {day.strftime('%B')}, {day.year}"


def cue_slots(position: int, cues: int = 6) -> tuple:
    """Indices of the two cues carried by the turn at ``position`` in its group."""
    return (2 * position) % cues, (2 * position + 1) % cues


def create_planted_dataset(groups: int = 20, turns_per_group: int = 10,
                           seed: int = 7, conversation_id: str = "planted",
                           long_padding: tuple = (20, 24)) -> ConversationDataset:
    """
    One conversation of ``groups`` topics with group-exclusive vocabulary.

    Every turn of a group carries the group's two anchor words and two of
    its six cue words. Odd turns are padded with filler words; turns 4 and
    8 of each group mention the weekend, which every question also does, so
    single-layer search sees many near-miss distractors. Three questions
    per group target cues 0, 2 and 4; their gold evidence is the group's
    turns containing the cue.
    """
    rng = np.random.default_rng(seed)
    vocabulary: Set[str] = set()

    turns: List[TurnRecord] = []
    questions: List[Question] = []
    for group in range(groups):
        anchors = pseudo_words(rng, 2, vocabulary)
        vocabulary.update(anchors)
        cues = pseudo_words(rng, 6, vocabulary)
        vocabulary.update(cues)
        stamp = session_timestamp(group)

        group_turns = []
        for position in range(turns_per_group):
            first, second = cue_slots(position)
            frame = _FRAMES[int(rng.integers(len(_FRAMES)))]
            text = frame.format(a0=anchors[0], a1=anchors[1], p=cues[first], q=cues[second])
            if position in (4, 8):
                text += _WEEKEND
            if position % 2 == 1:
                padding = pseudo_words(rng, int(rng.integers(long_padding[0], long_padding[1] + 1)),
                                       vocabulary)
                vocabulary.update(padding)
                text += ", " + " ".join(padding)
            record = TurnRecord(turn_id=len(turns) + 1, speaker=SPEAKERS[position % 2],
                                text=text, timestamp=stamp)
            turns.append(record)
            group_turns.append((record, (cues[first], cues[second])))

        for target in (0, 2, 4):
            cue = cues[target]
            evidence = [record for record, carried in group_turns if cue in carried]
            first_record, first_carried = next((r, c) for r, c in group_turns if cue in c)
            category = CATEGORIES[len(questions) % len(CATEGORIES)]
            distractor = None
            if category == "temporal":
                gold = first_record.timestamp
            elif category == "adversarial":
                gold = NOT_MENTIONED
                distractor = pseudo_words(rng, 1, vocabulary)[0]
                vocabulary.add(distractor)
            else:
                gold = first_carried[1] if first_carried[0] == cue else first_carried[0]
            questions.append(Question(
                question_id=f"{conversation_id}-q{len(questions) + 1}",
                conversation_id=conversation_id,
                category=category,
                question=f"What was said about {cue} over the weekend?",
                gold_answer=gold,
                gold_evidence=[record.turn_id for record in evidence],
                distractor=distractor,
            ))

    dataset = ConversationDataset(
        conversations=[Conversation(conversation_id=conversation_id, turns=turns)],
        questions=questions,
    )
    return dataset.check_integrity()


def fixed_size_turns(count: int, words_per_turn: int = 12, vocabulary_size: int = 5000,
                     seed: int = 11, start_id: int = 1) -> List[DialogueTurn]:
    """``count`` turns of ``words_per_turn`` six-letter words each."""
    rng = np.random.default_rng(seed)
    vocabulary = np.array(pseudo_words(rng, vocabulary_size))
    picks = rng.integers(vocabulary_size, size=(count, words_per_turn))
    stamp = session_timestamp(0)
    return [
        DialogueTurn(turn_id=start_id + i, speaker=SPEAKERS[i % 2],
                     text=" ".join(vocabulary[row]), timestamp=stamp)
        for i, row in enumerate(picks)
    ]
