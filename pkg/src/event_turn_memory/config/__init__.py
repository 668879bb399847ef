from .settings import (
    AppConfig,
    EncoderConfig,
    EvaluationConfig,
    LLMConfig,
    LoggingConfig,
    MemoryConfig,
    PricingConfig,
    RetrievalConfig,
    get_config,
)

__all__ = [
    "AppConfig",
    "EncoderConfig",
    "EvaluationConfig",
    "LLMConfig",
    "LoggingConfig",
    "MemoryConfig",
    "PricingConfig",
    "RetrievalConfig",
    "get_config",
]
