"""
Tests for the retrieval pipeline.
"""
import math

import pytest

from conftest import make_turn
from event_turn_memory.config.settings import RetrievalConfig
from event_turn_memory.exceptions import MemoryEngineError
from event_turn_memory.llm.gateway import LLMGateway
from event_turn_memory.llm.prompts import NOT_MENTIONED, PromptFamily
from event_turn_memory.llm.providers import rule_final_qa, scripted_stub
from event_turn_memory.retrieval import (
    NO_EVIDENCE,
    EvidenceItem,
    EvidenceSet,
    Provenance,
    RetrievalTrace,
    Retriever,
)
from event_turn_memory.system import ConversationMemory
from event_turn_memory.utils.data_generator import create_planted_dataset


@pytest.fixture(scope="module")
def small_corpus():
    return create_planted_dataset(groups=4, seed=3, conversation_id="small")


@pytest.fixture
def memory(settings, small_corpus):
    memory = ConversationMemory(settings, conversation_id="small")
    memory.add_turns(small_corpus.conversations[0].dialogue_turns())
    return memory


def retriever_with(memory, provider, **config):
    return Retriever(memory.store, LLMGateway(provider), RetrievalConfig(**config))


def family_calls(gateway, family):
    return [record for record in gateway.call_log if record.family == family]


class TestEvidenceSet:
    def test_deduplicated_and_chronological(self, store):
        turns = [make_turn(store, turn_id, f"turn {turn_id} text") for turn_id in (1, 2, 3)]
        evidence = EvidenceSet([EvidenceItem(turns[2], Provenance.SEMANTIC),
                                EvidenceItem(turns[0], Provenance.SEMANTIC),
                                EvidenceItem(turns[2], Provenance.SEMANTIC)])

        assert evidence.turn_ids == [1, 3]
        assert len(evidence) == 2
        assert 3 in evidence and 2 not in evidence

    def test_subset_never_adds(self, store):
        turns = [make_turn(store, turn_id, f"turn {turn_id} text") for turn_id in (1, 2)]
        evidence = EvidenceSet.from_turns(turns, Provenance.FLAT)

        assert evidence.subset([2, 7]).turn_ids == [2]

    def test_merge_provenance(self, store, gateway):
        turns = {turn_id: make_turn(store, turn_id, f"turn {turn_id} text") for turn_id in (1, 2, 3)}
        retriever = Retriever(store, gateway)

        merged = retriever.merge([turns[2], turns[1]], [turns[3], turns[2]])

        assert merged.turn_ids == [1, 2, 3]
        assert merged.provenance(1) is Provenance.SEMANTIC
        assert merged.provenance(2) is Provenance.BOTH
        assert merged.provenance(3) is Provenance.PREDICTED


class TestFullPipeline:
    def test_subset_chain_holds(self, memory, small_corpus):
        for question in small_corpus.questions:
            trace = memory.retrieve(question.question)

            assert set(trace.final.turn_ids) <= set(trace.candidates.turn_ids)
            assert set(trace.candidates.turn_ids) == set(trace.semantic) | set(trace.predicted)
            assert len(trace.semantic) <= 10 and len(trace.events) <= 10
            assert trace.final.turn_ids == sorted(trace.final.turn_ids)

    def test_predictions_stay_inside_retrieved_events(self, memory, small_corpus):
        trace = memory.retrieve(small_corpus.questions[0].question)
        linked = set()
        for event_id in trace.events:
            linked.update(memory.store.get_event(event_id).link_set)

        assert set(trace.predicted) <= linked

    def test_planted_evidence_is_found(self, memory, small_corpus):
        for question in small_corpus.questions:
            trace = memory.retrieve(question.question)
            assert set(question.gold_evidence) <= set(trace.final.turn_ids)

    def test_deterministic(self, memory, small_corpus):
        question = small_corpus.questions[1]
        first = memory.ask(question.question, question.category, question.distractor)
        second = memory.ask(question.question, question.category, question.distractor)

        assert first.trace.to_dict() == second.trace.to_dict()
        assert first.answer == second.answer

    def test_retrieval_does_not_mutate_store(self, memory, small_corpus):
        before = memory.store.stats()
        memory.retrieve(small_corpus.questions[0].question)

        assert memory.store.stats() == before

    def test_filter_failure_keeps_semantic_candidates(self, memory, small_corpus):
        provider = scripted_stub(faults={PromptFamily.EVIDENCE_FILTER: math.inf})
        retriever = retriever_with(memory, provider)

        trace = retriever.retrieve(small_corpus.questions[0].question)

        assert set(trace.final.turn_ids) == set(trace.semantic)

    def test_hierarchy_disabled_runs_flat(self, memory, small_corpus):
        retriever = retriever_with(memory, scripted_stub(), hierarchy_enabled=False)
        trace = retriever.retrieve(small_corpus.questions[0].question)

        assert trace.mode == "flat"
        assert trace.events == [] and trace.predicted == []
        assert family_calls(retriever.gateway, "event_local_selection") == []


class TestModes:
    def test_no_hierarchy_uses_combined_budget(self, memory, small_corpus):
        trace = memory.retrieve(small_corpus.questions[0].question, mode="no-hierarchy")

        assert len(trace.candidates) == 20
        assert trace.events == []

    def test_vector_mode_skips_filter(self, memory, small_corpus):
        calls_before = len(memory.gateway.call_log)
        trace = memory.retrieve(small_corpus.questions[0].question, mode="vector")

        assert trace.final.turn_ids == trace.candidates.turn_ids
        assert len(trace.candidates) == 40
        assert len(trace.ranked) == 40
        new_calls = memory.gateway.call_log[calls_before:]
        assert [record.family for record in new_calls] == ["query_keywords"]

    def test_flat_filters_top_n(self, memory, small_corpus):
        trace = memory.retrieve(small_corpus.questions[0].question, mode="flat")

        assert len(trace.candidates) == 40
        assert set(trace.final.turn_ids) <= set(trace.candidates.turn_ids)

    def test_unknown_mode(self, memory):
        with pytest.raises(ValueError, match="unknown retrieval mode"):
            memory.retrieve("anything?", mode="psychic")


class TestKeywords:
    def test_empty_question(self, memory):
        with pytest.raises(ValueError):
            memory.retriever.extract_keywords("  ")

    def test_failure_falls_back_to_question_tokens(self, memory):
        provider = scripted_stub(faults={PromptFamily.QUERY_KEYWORDS: math.inf})
        retriever = retriever_with(memory, provider)

        assert retriever.extract_keywords("Where did Melanie paint the sunrise?") == \
            ["melanie", "paint", "sunrise"]

    def test_empty_keywords_fall_back(self, memory):
        provider = scripted_stub({PromptFamily.QUERY_KEYWORDS: lambda request: {"keywords": []}})
        retriever = retriever_with(memory, provider)

        assert retriever.extract_keywords("Which lake?") == ["lake"]


class TestPrediction:
    @pytest.fixture
    def big_event(self, store):
        for turn_id in range(1, 31):
            make_turn(store, turn_id, f"marathon training run {turn_id}")
        event_id = store.create_event("marathon training", [], list(range(1, 31)))
        return store.get_event(event_id)

    def test_batches_linked_turns(self, store, big_event):
        gateway = LLMGateway(scripted_stub())
        retriever = Retriever(store, gateway, RetrievalConfig(predict_batch_size=25))

        predicted = retriever.predict("How did marathon training go?", big_event, ["marathon"])

        assert len(family_calls(gateway, "event_local_selection")) == 2
        assert [turn.turn_id for turn in predicted] == list(range(1, 31))

    def test_foreign_ids_dropped(self, store, big_event):
        rule = lambda request: {"turn_ids": [2, 500]}
        retriever = Retriever(store, LLMGateway(
            scripted_stub({PromptFamily.EVENT_LOCAL_SELECTION: rule})))

        predicted = retriever.predict("q?", big_event, ["marathon"])

        assert [turn.turn_id for turn in predicted] == [2]

    def test_failure_predicts_nothing(self, store, big_event):
        provider = scripted_stub(faults={PromptFamily.EVENT_LOCAL_SELECTION: math.inf})
        retriever = Retriever(store, LLMGateway(provider))

        assert retriever.predict("q?", big_event, ["marathon"]) == []


class TestFilter:
    def test_empty_candidates_skip_the_call(self, memory):
        gateway = LLMGateway(scripted_stub())
        retriever = Retriever(memory.store, gateway)

        assert len(retriever.filter("q?", EvidenceSet())) == 0
        assert gateway.call_log == []

    def test_extra_ids_ignored(self, store):
        turns = [make_turn(store, turn_id, f"turn {turn_id} text") for turn_id in (1, 2)]
        rule = lambda request: {"turn_ids": [2, 77]}
        retriever = Retriever(store, LLMGateway(scripted_stub({PromptFamily.EVIDENCE_FILTER: rule})))

        final = retriever.filter("q?", EvidenceSet.from_turns(turns, Provenance.SEMANTIC))

        assert final.turn_ids == [2]


class TestAnswer:
    def test_unknown_category(self, memory):
        with pytest.raises(ValueError, match="category"):
            memory.retriever.answer("q?", [], "poetry")

    def test_adversarial_needs_distractor(self, memory):
        with pytest.raises(ValueError, match="distractor"):
            memory.retriever.answer("q?", [], "adversarial")

    def test_empty_evidence_placeholder(self, store):
        prompts = []

        def recording_rule(request):
            prompts.append(request.rendered_prompt)
            return rule_final_qa(request)

        retriever = Retriever(store, LLMGateway(scripted_stub({PromptFamily.FINAL_QA: recording_rule})))
        answer = retriever.answer("Who painted the sunrise?", [], "single_hop")

        assert answer == NOT_MENTIONED
        assert NO_EVIDENCE in prompts[0]

    def test_evidence_rendered_chronologically(self, store):
        turns = [make_turn(store, turn_id, f"turn {turn_id} text") for turn_id in (1, 2, 3)]
        prompts = []

        def recording_rule(request):
            prompts.append(request.rendered_prompt)
            return rule_final_qa(request)

        retriever = Retriever(store, LLMGateway(scripted_stub({PromptFamily.FINAL_QA: recording_rule})))
        retriever.answer("What text?", [turns[2], turns[0], turns[1]], "single_hop")

        positions = [prompts[0].index(f"({turn_id}) Evan") for turn_id in (1, 2, 3)]
        assert positions == sorted(positions)

    @pytest.mark.parametrize("raw, expected", [
        ("Paris", "Paris"),
        ("I believe it was Paris", "Paris"),
        (NOT_MENTIONED, NOT_MENTIONED),
        ("no idea", NOT_MENTIONED),
    ])
    def test_adversarial_answer_is_one_of_two_options(self, store, raw, expected):
        rule = lambda request: {"answer": raw}
        retriever = Retriever(store, LLMGateway(scripted_stub({PromptFamily.FINAL_QA: rule})))

        assert retriever.answer("Where did they move?", [], "adversarial", "Paris") == expected

    def test_adversarial_stub_rejects_unsupported_distractor(self, store):
        turn = make_turn(store, 1, "We moved to Lisbon last spring")
        retriever = Retriever(store, LLMGateway(scripted_stub()))

        assert retriever.answer("Where did they move?", [turn], "adversarial", "Paris") == NOT_MENTIONED
        assert retriever.answer("Where did they move?", [turn], "adversarial", "Lisbon") == "Lisbon"


class TestSubsetChainCheck:
    def test_violation_raises(self, store, gateway):
        turns = [make_turn(store, turn_id, f"turn {turn_id} text") for turn_id in (1, 2)]
        trace = RetrievalTrace(
            question="q?", mode="full", keywords=["q"], semantic=[1],
            candidates=EvidenceSet.from_turns(turns[:1], Provenance.SEMANTIC),
            final=EvidenceSet.from_turns(turns, Provenance.SEMANTIC),
        )

        with pytest.raises(MemoryEngineError, match="not a subset"):
            Retriever(store, gateway).check_subset_chain(trace)
