"""
Benchmark runner: per-question retrieval and answering, metrics and token/cost reports.
"""
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from ..config.settings import AppConfig, get_config
from ..encoders import Encoder
from ..exceptions import MemoryEngineError
from ..llm.prompts import CATEGORIES
from ..llm.providers import Provider
from ..llm.usage import PricingTable, UsageLedger
from ..retrieval import MODES, RetrievalTrace
from ..system import ConversationMemory
from ..utils.logging import log_info, log_performance, log_warning, memory_logger
from .dataset import ConversationDataset, Question
from .metrics import category_rank, evidence_metrics, fixed_k_truncate, macro_average, token_f1

ProviderFactory = Callable[[], Provider]
EncoderFactory = Callable[[], Encoder]


@dataclass
class QuestionResult:
    question_id: str
    conversation_id: str
    category: str
    prediction: str
    gold_answer: str
    evidence: List[int]
    gold_evidence: List[int]
    precision: Optional[float]
    recall: Optional[float]
    k: int
    f1: float
    ranked: List[int] = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("ranked")
        return data


@dataclass
class BenchmarkReport:
    mode: str
    questions: int
    failures: int
    category_f1: Dict[str, Optional[float]]
    overall_f1: Optional[float]
    avg_k: Optional[float]
    macro_precision: Optional[float]
    macro_recall: Optional[float]
    usage: Dict[str, Any]
    results: List[QuestionResult] = field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            **{category: self.category_f1.get(category) for category in CATEGORIES},
            "overall_f1": self.overall_f1,
            "avg_k": self.avg_k,
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "questions": self.questions,
            "failures": self.failures,
        }

    def to_dict(self, include_results: bool = True) -> Dict[str, Any]:
        data = {
            "mode": self.mode,
            "questions": self.questions,
            "failures": self.failures,
            "category_f1": {category: self.category_f1.get(category) for category in CATEGORIES},
            "overall_f1": self.overall_f1,
            "avg_k": self.avg_k,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "usage": self.usage,
        }
        if include_results:
            data["results"] = [result.to_dict() for result in self.results]
        return data

    def to_json(self, include_results: bool = True) -> str:
        return json.dumps(self.to_dict(include_results), indent=2, sort_keys=True) + "\n"

    def to_frame(self) -> pd.DataFrame:
        """One row per question, for diffing runs."""
        columns = ["question_id", "conversation_id", "category", "precision", "recall",
                   "k", "f1", "error"]
        return pd.DataFrame([result.to_dict() for result in self.results], columns=columns)

    def write(self, path: Union[str, Path]) -> Path:
        """Write the JSON report and a CSV question table next to it."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        self.to_frame().to_csv(path.with_suffix(".csv"), index=False)
        return path


# Building memories

@dataclass
class MemoryBank:
    """Ingested memories for every conversation of a dataset plus their construction ledger."""
    memories: Dict[str, ConversationMemory]
    ledger: UsageLedger


def build_memories(dataset: ConversationDataset, settings: Optional[AppConfig] = None,
                   provider_factory: Optional[ProviderFactory] = None,
                   encoder_factory: Optional[EncoderFactory] = None,
                   progress: bool = False) -> MemoryBank:
    """Ingest each conversation into its own store."""
    settings = settings or get_config()
    ledger = UsageLedger()
    memories = {}
    for conversation in tqdm(dataset.conversations, desc="Conversations", disable=not progress):
        memory = ConversationMemory(
            settings,
            provider=provider_factory() if provider_factory else None,
            encoder=encoder_factory() if encoder_factory else None,
            ledger=ledger,
            conversation_id=conversation.conversation_id,
        )
        memory.add_turns(conversation.dialogue_turns())
        memories[conversation.conversation_id] = memory
        log_info(f"Built memory for {conversation.conversation_id}: {len(memory.store.turns)} turns, "
                 f"{len(memory.store.events)} events", conversation_id=conversation.conversation_id)
    return MemoryBank(memories=memories, ledger=ledger)


def _query_view(memory: ConversationMemory, ledger: UsageLedger) -> ConversationMemory:
    """Same store and provider, separate ledger."""
    return ConversationMemory(memory.settings, provider=memory.gateway.provider,
                              ledger=ledger, store=memory.store)


# Evaluation

def _failed_result(question: Question, error: Exception) -> QuestionResult:
    score = evidence_metrics([], question.gold_evidence)
    return QuestionResult(
        question_id=question.question_id, conversation_id=question.conversation_id,
        category=question.category, prediction="", gold_answer=question.gold_answer,
        evidence=[], gold_evidence=list(question.gold_evidence),
        precision=score.precision, recall=score.recall, k=0,
        f1=token_f1("", question.gold_answer), error=f"{type(error).__name__}: {error}",
    )


def evaluate_question(memory: ConversationMemory, question: Question, mode: str = "full",
                      answer: bool = True) -> QuestionResult:
    """Retrieve and answer one question; failures are captured in the result."""
    try:
        trace: RetrievalTrace = memory.retrieve(question.question, mode)
        prediction = ""
        if answer:
            prediction = memory.retriever.answer(question.question, trace.final.turns,
                                                 question.category, question.distractor)
    except MemoryEngineError as e:
        log_warning(f"Question {question.question_id} failed: {e}",
                    conversation_id=question.conversation_id, mode=mode)
        return _failed_result(question, e)

    score = evidence_metrics(trace.final.turn_ids, question.gold_evidence)
    return QuestionResult(
        question_id=question.question_id, conversation_id=question.conversation_id,
        category=question.category, prediction=prediction, gold_answer=question.gold_answer,
        evidence=trace.final.turn_ids, gold_evidence=list(question.gold_evidence),
        precision=score.precision, recall=score.recall, k=score.k,
        f1=token_f1(prediction, question.gold_answer) if answer else 0.0,
        ranked=list(trace.ranked),
    )


def summarize(mode: str, results: Sequence[QuestionResult], usage: Dict[str, Any]) -> BenchmarkReport:
    category_f1 = {
        category: macro_average([r.f1 for r in results if r.category == category])
        for category in CATEGORIES
    }
    return BenchmarkReport(
        mode=mode,
        questions=len(results),
        failures=sum(1 for r in results if r.error),
        category_f1=category_f1,
        overall_f1=macro_average([r.f1 for r in results]),
        avg_k=macro_average([float(r.k) for r in results]),
        macro_precision=macro_average([r.precision for r in results]),
        macro_recall=macro_average([r.recall for r in results]),
        usage=usage,
        results=list(results),
    )


@log_performance
def run_benchmark(dataset: ConversationDataset, mode: str = "full",
                  settings: Optional[AppConfig] = None,
                  provider_factory: Optional[ProviderFactory] = None,
                  encoder_factory: Optional[EncoderFactory] = None,
                  pricing: Optional[PricingTable] = None,
                  bank: Optional[MemoryBank] = None,
                  workers: Optional[int] = None,
                  progress: bool = False) -> BenchmarkReport:
    """
    Evaluate every question of ``dataset`` in one retrieval mode.

    Conversations are ingested unless a prebuilt ``bank`` is given; the
    report's usage covers construction plus this run's retrieval and answers.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    settings = settings or get_config()
    workers = workers or settings.evaluation.workers
    start = time.perf_counter()

    if bank is None:
        bank = build_memories(dataset, settings, provider_factory, encoder_factory, progress)
    ledger = UsageLedger()
    ledger.merge(bank.ledger)

    results: List[QuestionResult] = []
    for conversation in dataset.conversations:
        questions = dataset.questions_for(conversation.conversation_id)
        if not questions:
            continue
        memory = _query_view(bank.memories[conversation.conversation_id], ledger)
        results.extend(Parallel(n_jobs=workers, prefer="threads")(
            delayed(evaluate_question)(memory, question, mode) for question in questions
        ))

    report = summarize(mode, results, ledger.report(pricing))
    memory_logger.log_benchmark_complete(mode, report.questions, report.failures,
                                         time.perf_counter() - start)
    return report


def compare_modes(dataset: ConversationDataset, modes: Iterable[str] = ("full", "no-hierarchy", "flat"),
                  settings: Optional[AppConfig] = None,
                  provider_factory: Optional[ProviderFactory] = None,
                  encoder_factory: Optional[EncoderFactory] = None,
                  pricing: Optional[PricingTable] = None,
                  progress: bool = False) -> Dict[str, BenchmarkReport]:
    """Run several modes over memories ingested once."""
    bank = build_memories(dataset, settings, provider_factory, encoder_factory, progress)
    return {mode: run_benchmark(dataset, mode, settings, pricing=pricing, bank=bank)
            for mode in modes}


def comparison_table(reports: Dict[str, BenchmarkReport], rank_method: str = "average") -> pd.DataFrame:
    """Category F1 per mode with evidence metrics and the average category rank."""
    table = pd.DataFrame([report.summary() for report in reports.values()]).set_index("mode")
    scores = table[list(CATEGORIES)].astype(float).fillna(0.0)
    if len(table) >= 2:
        table["rank"] = category_rank(scores, method=rank_method)
    return table


# Fixed-K truncation

def fixed_k_table(results: Sequence[QuestionResult], ks: Sequence[int]) -> pd.DataFrame:
    """Per-question precision/recall/k for each truncation of the ranked list."""
    rows = []
    for result in results:
        for k in list(ks) + [None]:
            truncated = fixed_k_truncate(result.ranked, k)
            score = evidence_metrics(truncated, result.gold_evidence)
            rows.append({"question_id": result.question_id, "K": "full" if k is None else str(k),
                         "precision": score.precision, "recall": score.recall, "k": score.k})
    return pd.DataFrame(rows, columns=["question_id", "K", "precision", "recall", "k"])


def fixed_k_sweep(dataset: ConversationDataset, ks: Optional[Sequence[int]] = None,
                  settings: Optional[AppConfig] = None,
                  provider_factory: Optional[ProviderFactory] = None,
                  encoder_factory: Optional[EncoderFactory] = None,
                  bank: Optional[MemoryBank] = None) -> pd.DataFrame:
    """
    Macro precision, recall and Avg K of vector retrieval truncated at each K.

    The last row is the full pipeline on the same memories, for comparison.
    """
    settings = settings or get_config()
    ks = list(ks or settings.evaluation.fixed_k_values)
    if bank is None:
        bank = build_memories(dataset, settings, provider_factory, encoder_factory)

    ledger = UsageLedger()
    vector, pipeline = [], []
    for conversation in dataset.conversations:
        memory = _query_view(bank.memories[conversation.conversation_id], ledger)
        for question in dataset.questions_for(conversation.conversation_id):
            vector.append(evaluate_question(memory, question, "vector", answer=False))
            pipeline.append(evaluate_question(memory, question, "full", answer=False))

    per_question = fixed_k_table(vector, ks)
    rows = []
    for label in [str(k) for k in ks] + ["full"]:
        subset = per_question[per_question["K"] == label]
        rows.append(_macro_row(label, subset["precision"], subset["recall"], subset["k"]))
    rows.append(_macro_row("pipeline", [r.precision for r in pipeline],
                           [r.recall for r in pipeline], [r.k for r in pipeline]))
    return pd.DataFrame(rows, columns=["K", "avg_k", "precision", "recall"])


def _macro_row(label: str, precision, recall, k) -> Dict[str, Any]:
    def defined(values):
        return [None if pd.isna(value) else float(value) for value in values]
    return {"K": label, "avg_k": macro_average(defined(k)),
            "precision": macro_average(defined(precision)),
            "recall": macro_average(defined(recall))}


# Cost

def cost_report(ledger: UsageLedger, pricing: Optional[PricingTable] = None) -> pd.DataFrame:
    """One line per billed stage group plus a total, costs as exact decimals."""
    pricing = pricing or PricingTable.hybrid()
    cost = ledger.report(pricing)["cost"]
    rows = [{"stages": line["label"], "model": line["model"],
             "input_tokens": line["prompt_tokens"], "output_tokens": line["completion_tokens"],
             "cost": line["cost"]} for line in cost["lines"]]
    rows.append({"stages": "total", "model": "",
                 "input_tokens": sum(row["input_tokens"] for row in rows),
                 "output_tokens": sum(row["output_tokens"] for row in rows),
                 "cost": cost["total"]})
    return pd.DataFrame(rows, columns=["stages", "model", "input_tokens", "output_tokens", "cost"])


def pricing_from_config(settings: Optional[AppConfig] = None) -> PricingTable:
    settings = settings or get_config()
    if settings.pricing.path:
        return PricingTable.from_file(settings.pricing.path)
    return PricingTable.hybrid(settings.pricing.construction_model, settings.pricing.answer_model)
