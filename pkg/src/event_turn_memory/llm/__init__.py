"""
LLM access layer: prompt families, providers, structured output and usage accounting.
"""
from .gateway import LLMGateway, StructuredRequest, StructuredResult, extract_json
from .prompts import CATEGORIES, NOT_MENTIONED, PromptFamily, PromptLibrary
from .providers import (
    Completion,
    HTTPChatProvider,
    Provider,
    ScriptedStubProvider,
    provider_from_config,
    scripted_stub,
)
from .usage import CallRecord, ModelPrice, PricingTable, TokenUsage, UsageLedger

__all__ = [
    "CATEGORIES",
    "CallRecord",
    "Completion",
    "HTTPChatProvider",
    "LLMGateway",
    "ModelPrice",
    "NOT_MENTIONED",
    "PricingTable",
    "PromptFamily",
    "PromptLibrary",
    "Provider",
    "ScriptedStubProvider",
    "StructuredRequest",
    "StructuredResult",
    "TokenUsage",
    "UsageLedger",
    "extract_json",
    "provider_from_config",
    "scripted_stub",
]
