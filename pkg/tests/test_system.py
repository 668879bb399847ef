"""
Tests for the ConversationMemory facade.
"""
from event_turn_memory import ConversationMemory, quick_answer
from event_turn_memory.llm.prompts import NOT_MENTIONED

TURNS = [
    ("Evan", "I adopted a puppy named Oscar", "8 May, 2023"),
    ("Sam", "How is the garden going?", "8 May, 2023"),
    ("Sam", "My tomatoes finally ripened", "9 May, 2023"),
]


def filled_memory(settings):
    memory = ConversationMemory(settings, conversation_id="facade")
    for speaker, text, timestamp in TURNS:
        memory.add_turn(speaker, text, timestamp)
    return memory


class TestConversationMemory:
    def test_turn_ids_are_assigned_in_order(self, settings):
        memory = filled_memory(settings)

        assert memory.store.ingestion_order == [1, 2, 3]
        assert memory.add_turn("Evan", "Oscar loves the beach") == 4

    def test_ask(self, settings):
        result = filled_memory(settings).ask("What is the name of the puppy?")

        assert result.evidence_ids == [1]
        assert "Oscar" in result.answer

    def test_temporal_answer_uses_timestamp(self, settings):
        result = filled_memory(settings).ask("When did the tomatoes ripen?", category="temporal")

        assert result.answer == "9 May, 2023"

    def test_adversarial(self, settings):
        memory = filled_memory(settings)

        assert memory.ask("What did Sam adopt?", "adversarial", "kitten").answer == NOT_MENTIONED
        assert memory.ask("What did Evan adopt?", "adversarial", "Oscar").answer == "Oscar"

    def test_usage_is_tracked(self, settings):
        memory = filled_memory(settings)
        memory.ask("What is the name of the puppy?")

        totals = memory.ledger.totals()
        assert totals["memory_construction"]["call_count"] > 0
        assert totals["retrieval"]["call_count"] > 0
        assert totals["answer"]["call_count"] == 1

    def test_save_and_load_answer_the_same(self, settings, tmp_path):
        memory = filled_memory(settings)
        path = memory.save(tmp_path / "facade.etm")

        reloaded = ConversationMemory.load(path, settings=settings)
        question = "What is the name of the puppy?"

        assert reloaded.store == memory.store
        assert reloaded.ask(question).answer == memory.ask(question).answer
        assert reloaded.stats() == memory.stats()


def test_quick_answer(settings):
    answer = quick_answer([(speaker, text) for speaker, text, _ in TURNS],
                          "What is the name of the puppy?", settings=settings)

    assert "Oscar" in answer
