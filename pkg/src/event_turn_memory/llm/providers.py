"""
LLM providers: a deterministic scripted stub and an HTTP chat-completion client.
"""
import abc
import json
import logging
import os
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Mapping, Optional, Union

import requests

from ..exceptions import ProviderUnavailableError, UnknownFamilyError
from ..utils.text import STOPWORDS, content_tokens, overlap, tokenize, top_terms, words
from .prompts import NOT_MENTIONED, PromptFamily

if TYPE_CHECKING:
    from .gateway import StructuredRequest

logger = logging.getLogger(__name__)


@dataclass
class Completion:
    """Raw provider output plus the token usage it cost."""
    text: str
    prompt_tokens: int
    completion_tokens: int
    model: str = ""


def approximate_tokens(text: str) -> int:
    """Whitespace token count, used when a provider reports no usage."""
    return len(text.split())


class Provider(abc.ABC):
    """Base class for LLM providers."""

    name: str = "provider"

    @abc.abstractmethod
    def complete(self, request: "StructuredRequest") -> Completion:
        """Return the raw completion for one request."""


class HTTPChatProvider(Provider):
    """OpenAI-compatible ``/chat/completions`` client."""

    name = "http"

    def __init__(self, endpoint: str, model: str, api_key_env: str = "OPENAI_API_KEY",
                 temperature: float = 0.0, timeout: float = 60.0,
                 answer_model: Optional[str] = None,
                 session: Optional[requests.Session] = None):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.answer_model = answer_model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.timeout = timeout
        self._session = session or requests.Session()

        if not os.getenv(api_key_env):
            logger.warning(f"{api_key_env} is not set; requests are sent without credentials")

    def model_for(self, family: PromptFamily) -> str:
        if family is PromptFamily.FINAL_QA and self.answer_model:
            return self.answer_model
        return self.model

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.getenv(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def complete(self, request: "StructuredRequest") -> Completion:
        model = self.model_for(request.family)
        payload = {
            "model": model,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "temperature": self.temperature,
        }
        try:
            response = self._session.post(
                f"{self.endpoint}/chat/completions",
                json=payload,
                headers=self._headers(),
                timeout=self.timeout,
            )
            response.raise_for_status()
        except requests.RequestException as e:
            raise ProviderUnavailableError(f"chat completion request failed: {e}") from e
        try:
            data = response.json()
        except ValueError as e:
            raise ProviderUnavailableError(f"chat completion returned invalid JSON: {e}") from e

        if not isinstance(data, dict):
            raise ProviderUnavailableError(
                f"chat completion returned {type(data).__name__}, expected an object")
        choices = data.get("choices") or [{}]
        if not isinstance(choices, list) or not isinstance(choices[0], dict):
            raise ProviderUnavailableError("chat completion has malformed choices")
        message = choices[0].get("message") or {}
        if not isinstance(message, dict):
            raise ProviderUnavailableError("chat completion has a malformed message")
        text = message.get("content") or ""
        usage = data.get("usage")
        if not isinstance(usage, dict):
            usage = {}
        prompt_tokens = int(usage.get("prompt_tokens") or approximate_tokens(request.rendered_prompt))
        completion_tokens = int(usage.get("completion_tokens") or approximate_tokens(text))
        return Completion(text=text, prompt_tokens=prompt_tokens,
                          completion_tokens=completion_tokens, model=data.get("model", model))


# Scripted stub

Rule = Callable[["StructuredRequest"], Union[Mapping[str, Any], str]]


def _turn_text(turn: Mapping[str, Any]) -> str:
    return f"{turn.get('speaker', '')} {turn.get('text', '')}"


def rule_turn_analysis(request: "StructuredRequest") -> Dict[str, Any]:
    turn = request.payload["turn"]
    keywords = content_tokens(turn["text"]) or tokenize(turn["text"]) or [turn["speaker"].lower()]
    return {
        "keywords": keywords,
        "tags": ["dialogue"],
        "context": f"{turn['speaker']} speaking with {len(request.payload.get('window', []))} earlier turns in view",
        "timestamp": turn.get("timestamp", ""),
    }


def make_affiliation_rule(threshold: int) -> Rule:
    def rule_event_affiliation(request: "StructuredRequest") -> Dict[str, Any]:
        keywords = request.payload["keywords"]
        chosen = [candidate["event_id"] for candidate in request.payload["candidates"]
                  if overlap(candidate["summary"], keywords) >= threshold]
        if chosen:
            return {"event_ids": chosen, "new_event": False}
        return {"event_ids": [], "new_event": True, "summary": ", ".join(keywords[:8])}
    return rule_event_affiliation


def rule_event_refresh(request: "StructuredRequest") -> Dict[str, Any]:
    turns = request.payload["turns"]
    summary = ", ".join(top_terms((turn["text"] for turn in turns), limit=8))
    return {
        "summary": summary or request.payload.get("summary") or "conversation",
        "facts": [{"turn_id": turn["turn_id"], "timestamp": turn.get("timestamp", ""),
                   "fact": f"{turn['speaker']}: {turn['text']}"} for turn in turns],
    }


def rule_fact_append(request: "StructuredRequest") -> Dict[str, Any]:
    turn = request.payload["turn"]
    return {"fact": f"{turn['speaker']}: {turn['text']}"}


def rule_query_keywords(request: "StructuredRequest") -> Dict[str, Any]:
    question = request.payload["question"]
    return {"keywords": content_tokens(question) or tokenize(question)}


def rule_event_local_selection(request: "StructuredRequest") -> Dict[str, Any]:
    # The summary is the anchor: an event whose summary shares no keyword is skipped.
    keywords = request.payload["keywords"]
    if overlap(request.payload["summary"], keywords) == 0:
        return {"turn_ids": []}
    return {"turn_ids": [turn["turn_id"] for turn in request.payload["turns"]
                         if overlap(_turn_text(turn), keywords) > 0]}


def rule_evidence_filter(request: "StructuredRequest") -> Dict[str, Any]:
    keywords = request.payload["keywords"]
    return {"turn_ids": [turn["turn_id"] for turn in request.payload["candidates"]
                         if overlap(_turn_text(turn), keywords) > 0]}


def _top_evidence(evidence: List[Mapping[str, Any]], keywords: List[str]) -> Optional[Mapping[str, Any]]:
    """Evidence turn matching the rarest keywords; earliest wins ties."""
    if not evidence:
        return None
    keyword_sets = {keyword: set(tokenize(keyword)) for keyword in keywords}
    turn_tokens = [set(tokenize(_turn_text(turn))) for turn in evidence]
    frequency = {keyword: sum(1 for tokens in turn_tokens if parts and parts <= tokens)
                 for keyword, parts in keyword_sets.items()}

    best, best_score = None, 0.0
    for turn, tokens in zip(evidence, turn_tokens):
        score = sum(1.0 / frequency[keyword] for keyword, parts in keyword_sets.items()
                    if parts and parts <= tokens)
        if score > best_score:
            best, best_score = turn, score
    return best if best is not None else evidence[0]


def rule_final_qa(request: "StructuredRequest") -> Dict[str, Any]:
    evidence = request.payload["evidence"]
    keywords = request.payload.get("keywords") or content_tokens(request.payload["question"])

    if request.category == "adversarial":
        distractor = request.payload["distractor"]
        evidence_tokens = set()
        for turn in evidence:
            evidence_tokens.update(tokenize(_turn_text(turn)))
        parts = content_tokens(distractor) or tokenize(distractor)
        supported = bool(parts) and all(part in evidence_tokens for part in parts)
        return {"answer": distractor if supported else NOT_MENTIONED}

    top = _top_evidence(evidence, keywords)
    if top is None:
        return {"answer": NOT_MENTIONED}
    if request.category == "temporal":
        return {"answer": top.get("timestamp") or NOT_MENTIONED}

    question_tokens = set(tokenize(request.payload["question"]))
    echoed = [word for word in words(top["text"])
              if word.lower() not in STOPWORDS and word.lower() not in question_tokens]
    return {"answer": " ".join(echoed) or top["text"]}


class ScriptedStubProvider(Provider):
    """
    Deterministic rule-driven provider.

    ``rules`` maps families to callables returning a dict (serialized to
    JSON) or raw text. ``faults`` makes the first n calls of a family return
    malformed output; ``math.inf`` never recovers. Token counts are
    whitespace word counts of the prompt and the output.
    """

    name = "stub"

    def __init__(self, rules: Optional[Mapping[PromptFamily, Rule]] = None,
                 overlap_threshold: int = 2,
                 faults: Optional[Mapping[PromptFamily, float]] = None,
                 model: str = "scripted-stub"):
        self.overlap_threshold = overlap_threshold
        self.rules: Dict[PromptFamily, Rule] = default_rules(overlap_threshold)
        if rules:
            self.rules.update({PromptFamily(family): rule for family, rule in rules.items()})
        self.faults: Dict[PromptFamily, float] = {
            PromptFamily(family): count for family, count in (faults or {}).items()
        }
        self.model = model
        self._calls = defaultdict(int)
        self._lock = threading.Lock()

    def complete(self, request: "StructuredRequest") -> Completion:
        rule = self.rules.get(request.family)
        if rule is None:
            raise UnknownFamilyError(request.family)

        with self._lock:
            self._calls[request.family] += 1
            call_number = self._calls[request.family]

        if call_number <= self.faults.get(request.family, 0):
            text = '{"malformed": '
        else:
            output = rule(request)
            text = output if isinstance(output, str) else json.dumps(output, sort_keys=True)

        return Completion(text=text,
                          prompt_tokens=approximate_tokens(request.rendered_prompt),
                          completion_tokens=approximate_tokens(text),
                          model=self.model)


def default_rules(overlap_threshold: int = 2) -> Dict[PromptFamily, Rule]:
    return {
        PromptFamily.TURN_ANALYSIS: rule_turn_analysis,
        PromptFamily.EVENT_AFFILIATION: make_affiliation_rule(overlap_threshold),
        PromptFamily.EVENT_REFRESH: rule_event_refresh,
        PromptFamily.FACT_APPEND: rule_fact_append,
        PromptFamily.QUERY_KEYWORDS: rule_query_keywords,
        PromptFamily.EVENT_LOCAL_SELECTION: rule_event_local_selection,
        PromptFamily.EVIDENCE_FILTER: rule_evidence_filter,
        PromptFamily.FINAL_QA: rule_final_qa,
    }


def scripted_stub(script: Optional[Mapping[PromptFamily, Rule]] = None,
                  overlap_threshold: int = 2, **kwargs) -> ScriptedStubProvider:
    """Build a stub provider; ``script`` overrides the default rule per family."""
    return ScriptedStubProvider(rules=script, overlap_threshold=overlap_threshold, **kwargs)


def provider_from_config(llm_config, overlap_threshold: int = 2) -> Provider:
    """Build the provider named by an ``LLMConfig`` section."""
    if llm_config.provider == "stub":
        return ScriptedStubProvider(overlap_threshold=overlap_threshold)
    return HTTPChatProvider(
        endpoint=llm_config.endpoint,
        model=llm_config.model,
        api_key_env=llm_config.api_key_env,
        temperature=llm_config.temperature,
        timeout=llm_config.timeout,
        answer_model=llm_config.answer_model,
    )
