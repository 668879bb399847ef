"""
Tests for dataset loading, validation and LoCoMo conversion.
"""
import json

import pytest

from event_turn_memory.evaluation.dataset import (
    ConversationDataset,
    convert_locomo,
    load_dataset,
    parse_dataset,
    save_dataset,
)
from event_turn_memory.exceptions import DatasetIntegrityError, DatasetParseError
from event_turn_memory.llm.prompts import NOT_MENTIONED
from event_turn_memory.utils.data_generator import create_planted_dataset


def minimal_data():
    return {
        "conversations": [{
            "conversation_id": "c1",
            "turns": [
                {"turn_id": 1, "speaker": "Evan", "text": "I got a puppy", "timestamp": "1 May, 2023"},
                {"turn_id": 2, "speaker": "Sam", "text": "What is its name?"},
                {"turn_id": 3, "speaker": "Evan", "text": "Oscar"},
            ],
        }],
        "questions": [{
            "question_id": "q1", "conversation_id": "c1", "category": "single_hop",
            "question": "What is the puppy called?", "gold_answer": "Oscar",
            "gold_evidence": [1, 3],
        }],
    }


def locomo_sample():
    return {
        "sample_id": "conv-26",
        "conversation": {
            "speaker_a": "Caroline",
            "speaker_b": "Melanie",
            "session_2_date_time": "1:14 pm on 25 May, 2023",
            "session_2": [
                {"speaker": "Melanie", "dia_id": "D2:1", "text": "I ran a charity race"},
            ],
            "session_1_date_time": "1:56 pm on 8 May, 2023",
            "session_1": [
                {"speaker": "Caroline", "dia_id": "D1:1", "text": "I went to a support group"},
                {"speaker": "Melanie", "dia_id": "D1:2", "text": "I painted a sunrise"},
            ],
        },
        "qa": [
            {"question": "What did Melanie paint?", "answer": "A sunrise",
             "evidence": ["D1:2"], "category": 4},
            {"question": "When did Melanie run a race?", "answer": "25 May 2023",
             "evidence": ["D2:1", "D9:9"], "category": 2},
            {"question": "What did Caroline paint?", "adversarial_answer": "A sunrise",
             "evidence": ["D1:2"], "category": 5},
            {"question": "Who knows?", "evidence": [], "category": 5},
        ],
    }


class TestLoading:
    def test_load(self, tmp_path):
        path = tmp_path / "data.json"
        path.write_text(json.dumps(minimal_data()))

        dataset = load_dataset(path)

        assert len(dataset.conversations) == 1
        assert dataset.conversation("c1").turns[0].timestamp == "1 May, 2023"
        assert dataset.conversation("c1").turns[1].timestamp == ""
        assert dataset.questions_for("c1")[0].gold_evidence == [1, 3]
        assert dataset.mean_turns == 3.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "absent.json")

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "conversations": [\n  oops\n]}')

        with pytest.raises(DatasetParseError, match="line 3"):
            load_dataset(path)

    def test_schema_error_reports_location(self):
        data = minimal_data()
        del data["conversations"][0]["turns"][1]["speaker"]

        with pytest.raises(DatasetParseError) as info:
            parse_dataset(data, "data.json")

        assert info.value.location == "data.json: conversations[0].turns[1].speaker"

    def test_unknown_category(self):
        data = minimal_data()
        data["questions"][0]["category"] = "trivia"

        with pytest.raises(DatasetParseError, match="category"):
            parse_dataset(data)

    def test_adversarial_without_distractor(self):
        data = minimal_data()
        data["questions"][0]["category"] = "adversarial"

        with pytest.raises(DatasetParseError, match="distractor"):
            parse_dataset(data)

    def test_save_and_reload(self, tmp_path):
        dataset = create_planted_dataset(groups=2)
        path = save_dataset(dataset, tmp_path / "nested" / "planted.json")

        assert load_dataset(path) == dataset


class TestIntegrity:
    def test_missing_gold_turn(self):
        data = minimal_data()
        data["questions"][0]["gold_evidence"] = [1, 7]

        with pytest.raises(DatasetIntegrityError) as info:
            parse_dataset(data)

        assert info.value.offending_id == 7

    def test_unknown_conversation(self):
        data = minimal_data()
        data["questions"][0]["conversation_id"] = "c9"

        with pytest.raises(DatasetIntegrityError, match="unknown conversation"):
            parse_dataset(data)

    def test_duplicate_question_id(self):
        data = minimal_data()
        data["questions"].append(dict(data["questions"][0]))

        with pytest.raises(DatasetIntegrityError, match="duplicate question"):
            parse_dataset(data)

    def test_turn_ids_must_increase(self):
        data = minimal_data()
        data["conversations"][0]["turns"][2]["turn_id"] = 2

        with pytest.raises(DatasetIntegrityError, match="must increase"):
            parse_dataset(data)

    def test_duplicate_conversation(self):
        data = minimal_data()
        data["conversations"].append(dict(data["conversations"][0]))

        with pytest.raises(DatasetIntegrityError, match="duplicate conversation"):
            parse_dataset(data)


class TestLocomoConversion:
    def test_sessions_in_numeric_order(self):
        dataset = convert_locomo(locomo_sample())
        turns = dataset.conversation("conv-26").turns

        assert [turn.turn_id for turn in turns] == [1, 2, 3]
        assert turns[0].text == "I went to a support group"
        assert turns[2].speaker == "Melanie"
        assert turns[2].timestamp == "1:14 pm on 25 May, 2023"

    def test_evidence_mapped_and_categories(self):
        dataset = convert_locomo([locomo_sample()])
        questions = {q.question_id: q for q in dataset.questions}

        assert questions["conv-26-q1"].category == "single_hop"
        assert questions["conv-26-q1"].gold_evidence == [2]
        # unknown dia ids are dropped
        assert questions["conv-26-q2"].category == "temporal"
        assert questions["conv-26-q2"].gold_evidence == [3]

    def test_adversarial_items(self):
        dataset = convert_locomo(locomo_sample())
        adversarial = [q for q in dataset.questions if q.category == "adversarial"]

        assert len(adversarial) == 1
        assert adversarial[0].distractor == "A sunrise"
        assert adversarial[0].gold_answer == NOT_MENTIONED

    def test_unknown_locomo_category(self):
        sample = locomo_sample()
        sample["qa"][0]["category"] = 8

        with pytest.raises(DatasetParseError, match="unknown category"):
            convert_locomo(sample)

    def test_missing_conversation(self):
        with pytest.raises(DatasetParseError, match="conversation"):
            convert_locomo({"sample_id": "x", "qa": []})


class TestPlantedCorpus:
    def test_shape(self, planted):
        assert isinstance(planted, ConversationDataset)
        assert len(planted.conversations[0].turns) == 200
        assert len(planted.questions) == 60
        assert {q.category for q in planted.questions} == \
            {"single_hop", "multi_hop", "temporal", "open_domain", "adversarial"}

    def test_gold_evidence_mentions_the_cue(self, planted):
        turns = {turn.turn_id: turn for turn in planted.conversations[0].turns}
        for question in planted.questions:
            cue = question.question.split()[4]
            assert question.gold_evidence
            assert all(cue in turns[turn_id].text for turn_id in question.gold_evidence)

    def test_deterministic(self):
        assert create_planted_dataset(groups=3, seed=5) == create_planted_dataset(groups=3, seed=5)
