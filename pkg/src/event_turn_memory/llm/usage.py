"""
Token accounting per pipeline stage and cost reporting.
"""
import json
import threading
from dataclasses import asdict, dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from ..exceptions import ConfigurationError

STAGES = ("memory_construction", "retrieval", "answer")
PER_TOKENS = Decimal(1_000_000)


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.prompt_tokens + other.prompt_tokens,
                          self.completion_tokens + other.completion_tokens)


@dataclass(frozen=True)
class CallRecord:
    """One provider call as seen by the gateway."""
    family: str
    stage: str
    prompt_tokens: int
    completion_tokens: int
    attempt: int
    ok: bool
    model: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ModelPrice:
    """Currency per 10⁶ tokens."""
    input: Decimal
    output: Decimal


DEFAULT_MODEL_PRICES = {
    "gpt-4o-mini": ModelPrice(Decimal("0.15"), Decimal("0.60")),
    "gpt-5": ModelPrice(Decimal("1.25"), Decimal("10.00")),
}


def _decimal(value: Any, where: str) -> Decimal:
    try:
        result = Decimal(str(value))
    except InvalidOperation:
        raise ConfigurationError(f"{where}: {value!r} is not a number") from None
    if result < 0:
        raise ConfigurationError(f"{where}: prices cannot be negative")
    return result


class PricingTable:
    """Per-model prices plus the model each stage is billed to."""

    def __init__(self, models: Mapping[str, ModelPrice], stages: Mapping[str, str]):
        unknown = [stage for stage in stages if stage not in STAGES]
        if unknown:
            raise ConfigurationError(f"unknown stages in pricing table: {unknown}")
        missing = sorted({model for model in stages.values() if model not in models})
        if missing:
            raise ConfigurationError(f"no price for models {missing}")
        self.models = dict(models)
        self.stages = {stage: stages.get(stage) for stage in STAGES}

    @classmethod
    def hybrid(cls, construction_model: str = "gpt-4o-mini", answer_model: str = "gpt-5",
               models: Optional[Mapping[str, ModelPrice]] = None) -> "PricingTable":
        """Cheap model for construction and retrieval, strong model for answers."""
        return cls(models or DEFAULT_MODEL_PRICES, {
            "memory_construction": construction_model,
            "retrieval": construction_model,
            "answer": answer_model,
        })

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PricingTable":
        try:
            models = {
                name: ModelPrice(_decimal(price["input"], f"models.{name}.input"),
                                 _decimal(price["output"], f"models.{name}.output"))
                for name, price in data["models"].items()
            }
        except (KeyError, TypeError, AttributeError) as e:
            raise ConfigurationError(f"pricing table needs models with input/output prices: {e}") from e
        stages = data.get("stages")
        if not stages:
            if len(models) != 1:
                raise ConfigurationError("pricing table with several models needs a stages mapping")
            only = next(iter(models))
            stages = {stage: only for stage in STAGES}
        return cls(models, stages)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "PricingTable":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(data)

    def cost(self, model: str, prompt_tokens: int, completion_tokens: int) -> Decimal:
        price = self.models[model]
        return (Decimal(prompt_tokens) * price.input + Decimal(completion_tokens) * price.output) / PER_TOKENS


class UsageLedger:
    """Thread-safe per-stage token counters plus the full call log."""

    def __init__(self):
        self._lock = threading.Lock()
        self._calls: List[CallRecord] = []
        self._totals = {stage: {"prompt_tokens": 0, "completion_tokens": 0, "call_count": 0}
                        for stage in STAGES}

    def record(self, record: CallRecord):
        if record.stage not in self._totals:
            raise ValueError(f"unknown stage {record.stage!r}")
        if record.prompt_tokens < 0 or record.completion_tokens < 0:
            raise ValueError("token counts cannot be negative")
        with self._lock:
            self._calls.append(record)
            totals = self._totals[record.stage]
            totals["prompt_tokens"] += record.prompt_tokens
            totals["completion_tokens"] += record.completion_tokens
            totals["call_count"] += 1

    @property
    def calls(self) -> List[CallRecord]:
        with self._lock:
            return list(self._calls)

    def totals(self) -> Dict[str, Dict[str, int]]:
        with self._lock:
            return {stage: dict(values) for stage, values in self._totals.items()}

    def stage_usage(self, stage: str) -> TokenUsage:
        values = self.totals()[stage]
        return TokenUsage(values["prompt_tokens"], values["completion_tokens"])

    def merge(self, other: "UsageLedger"):
        for record in other.calls:
            self.record(record)

    def report(self, pricing: Optional[PricingTable] = None) -> Dict[str, Any]:
        """
        Per-stage totals and, with a pricing table, one cost line per billed model.

        Costs are exact decimals rendered as strings.
        """
        totals = self.totals()
        overall = {key: sum(values[key] for values in totals.values())
                   for key in ("prompt_tokens", "completion_tokens", "call_count")}
        report: Dict[str, Any] = {"stages": totals, "total": overall}
        if pricing is None:
            return report

        lines: Dict[str, Dict[str, Any]] = {}
        for stage in STAGES:
            model = pricing.stages.get(stage)
            if model is None:
                continue
            line = lines.setdefault(model, {"model": model, "stages": [],
                                            "prompt_tokens": 0, "completion_tokens": 0})
            line["stages"].append(stage)
            line["prompt_tokens"] += totals[stage]["prompt_tokens"]
            line["completion_tokens"] += totals[stage]["completion_tokens"]

        total_cost = Decimal(0)
        cost_lines = []
        for line in lines.values():
            cost = pricing.cost(line["model"], line["prompt_tokens"], line["completion_tokens"])
            total_cost += cost
            cost_lines.append({**line, "label": "+".join(line["stages"]), "cost": str(cost)})
        report["cost"] = {"lines": cost_lines, "total": str(total_cost)}
        return report
