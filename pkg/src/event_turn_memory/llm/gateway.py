"""
Uniform entry point for every LLM call: rendering, validation, retries, accounting.
"""
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Generic, List, Mapping, Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError

from ..exceptions import ProviderUnavailableError, SchemaFailureError
from ..utils.logging import memory_logger
from .prompts import PromptFamily, PromptLibrary, as_family, family_label
from .providers import Provider
from .usage import CallRecord, PricingTable, TokenUsage, UsageLedger

logger = logging.getLogger(__name__)

T = TypeVar("T", bound=BaseModel)

_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


@dataclass
class StructuredRequest:
    """A rendered prompt plus the schema its output must satisfy."""
    family: PromptFamily
    rendered_prompt: str
    expected_schema: Type[BaseModel]
    payload: Dict[str, Any] = field(default_factory=dict)
    category: Optional[str] = None

    def __post_init__(self):
        self.family = as_family(self.family)
        if not self.rendered_prompt or not self.rendered_prompt.strip():
            raise ValueError("rendered_prompt must not be empty")

    @property
    def label(self) -> str:
        return family_label(self.family, self.category)


@dataclass
class StructuredResult(Generic[T]):
    value: T
    usage: TokenUsage
    attempts: int
    raw_text: str


def extract_json(text: str) -> Any:
    """Parse the JSON object in a completion, tolerating code fences and chatter."""
    fenced = _FENCE.search(text)
    if fenced:
        text = fenced.group(1)
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end < start:
        raise ValueError("no JSON object in output")
    return json.loads(text[start:end + 1])


class LLMGateway:
    """
    Renders prompts, calls the provider and validates structured output.

    Invalid output is retried up to ``retry_limit`` times with the same
    prompt. Every attempt, failed or not, is recorded in the ledger.
    """

    def __init__(self, provider: Provider, prompts: Optional[PromptLibrary] = None,
                 retry_limit: int = 2, ledger: Optional[UsageLedger] = None):
        if retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        self.provider = provider
        self.prompts = prompts or PromptLibrary()
        self.retry_limit = retry_limit
        self.ledger = ledger or UsageLedger()

    def render_prompt(self, family, variables: Mapping[str, object],
                      category: Optional[str] = None) -> str:
        return self.prompts.render(family, variables, category=category)

    def build_request(self, family, variables: Mapping[str, object],
                      payload: Optional[Dict[str, Any]] = None,
                      category: Optional[str] = None) -> StructuredRequest:
        family = as_family(family)
        return StructuredRequest(
            family=family,
            rendered_prompt=self.render_prompt(family, variables, category),
            expected_schema=family.schema,
            payload=payload or {},
            category=category,
        )

    def _record(self, request: StructuredRequest, prompt_tokens: int, completion_tokens: int,
                attempt: int, ok: bool, model: str = ""):
        self.ledger.record(CallRecord(
            family=request.label, stage=request.family.stage,
            prompt_tokens=prompt_tokens, completion_tokens=completion_tokens,
            attempt=attempt, ok=ok, model=model,
        ))
        memory_logger.log_gateway_call(request.label, request.family.stage,
                                       prompt_tokens, completion_tokens, attempt, ok)

    def complete_structured(self, request: StructuredRequest) -> StructuredResult:
        usage = TokenUsage()
        raw_text = ""
        reason = None
        attempts = self.retry_limit + 1

        for attempt in range(1, attempts + 1):
            try:
                completion = self.provider.complete(request)
            except ProviderUnavailableError:
                self._record(request, 0, 0, attempt, ok=False)
                raise

            usage = usage + TokenUsage(completion.prompt_tokens, completion.completion_tokens)
            raw_text = completion.text
            try:
                value = request.expected_schema.model_validate(extract_json(raw_text))
            except (ValueError, ValidationError) as e:
                reason = str(e).splitlines()[0]
                self._record(request, completion.prompt_tokens, completion.completion_tokens,
                             attempt, ok=False, model=completion.model)
                continue

            self._record(request, completion.prompt_tokens, completion.completion_tokens,
                         attempt, ok=True, model=completion.model)
            return StructuredResult(value=value, usage=usage, attempts=attempt, raw_text=raw_text)

        raise SchemaFailureError(request.label, attempts, raw_text, reason)

    def call(self, family, variables: Mapping[str, object],
             payload: Optional[Dict[str, Any]] = None,
             category: Optional[str] = None) -> BaseModel:
        """Render, complete and return the validated value."""
        request = self.build_request(family, variables, payload=payload, category=category)
        return self.complete_structured(request).value

    @property
    def call_log(self) -> List[CallRecord]:
        return self.ledger.calls

    def usage_report(self, pricing: Optional[PricingTable] = None) -> Dict[str, Any]:
        return self.ledger.report(pricing)
