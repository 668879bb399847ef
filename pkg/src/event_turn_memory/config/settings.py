"""
Configuration management for the event-turn memory engine.
"""
from functools import lru_cache
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PROMPTS_DIR = Path(__file__).parent / "prompts"


class MemoryConfig(BaseSettings):
    """Memory construction configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_MEMORY_", env_file=".env", extra="ignore")

    window_size: int = Field(
        default=5,
        description="Number of preceding turns shown to turn analysis"
    )
    tau: int = Field(
        default=10,
        description="Event volume at which updates switch from full refresh to append"
    )
    affiliation_candidates: int = Field(
        default=10,
        description="Number of candidate events offered to affiliation"
    )
    affiliation_overlap: int = Field(
        default=2,
        description="Keyword overlap the scripted stub needs to affiliate a turn"
    )

    @field_validator("window_size", "tau", "affiliation_candidates")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("affiliation_overlap")
    @classmethod
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be >= 0")
        return value


class RetrievalConfig(BaseSettings):
    """Retrieval configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_RETRIEVAL_", env_file=".env", extra="ignore")

    k_turn: int = Field(default=10, description="Turns retrieved from the turn layer")
    k_event: int = Field(default=10, description="Events retrieved from the event layer")
    flat_top_n: int = Field(default=100, description="Turns retrieved by the flat baseline")
    predict_batch_size: int = Field(
        default=25,
        description="Linked turns shown per event-local selection prompt"
    )
    hierarchy_enabled: bool = Field(
        default=True,
        description="Consult the event layer; false runs flat retrieval"
    )

    @field_validator("k_turn", "k_event", "flat_top_n", "predict_batch_size")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value


class EncoderConfig(BaseSettings):
    """Embedding encoder configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_ENCODER_", env_file=".env", extra="ignore")

    kind: Literal["hashing", "noise", "remote"] = Field(
        default="hashing",
        description="Encoder implementation"
    )
    dimension: int = Field(default=384, description="Embedding dimension")
    seed: int = Field(default=13, description="Seed for the hashing encoder")
    noise_scale: float = Field(
        default=0.35,
        description="Distractor noise weight for the noise encoder"
    )
    endpoint: Optional[str] = Field(
        default=None,
        description="Embedding endpoint base URL for the remote encoder"
    )
    model: str = Field(default="all-MiniLM-L6-v2", description="Remote embedding model")

    @field_validator("dimension")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value


class LLMConfig(BaseSettings):
    """LLM provider configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_LLM_", env_file=".env", extra="ignore")

    provider: Literal["stub", "http"] = Field(default="stub", description="Provider kind")
    endpoint: str = Field(
        default="https://api.openai.com/v1",
        description="Chat-completion base URL"
    )
    model: str = Field(default="gpt-4o-mini", description="Model used for every family")
    answer_model: Optional[str] = Field(
        default=None,
        description="Optional separate model for final answers"
    )
    api_key_env: str = Field(
        default="OPENAI_API_KEY",
        description="Environment variable holding the bearer credential"
    )
    temperature: float = Field(default=0.0, description="Sampling temperature")
    retry_limit: int = Field(default=2, description="Retries after an invalid structured output")
    timeout: float = Field(default=60.0, description="HTTP timeout in seconds")
    prompts_dir: Path = Field(default=PROMPTS_DIR, description="Prompt template directory")

    @field_validator("retry_limit")
    @classmethod
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be >= 0")
        return value


class EvaluationConfig(BaseSettings):
    """Benchmark configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_EVAL_", env_file=".env", extra="ignore")

    workers: int = Field(default=4, description="Threads answering questions per conversation")
    fixed_k_values: List[int] = Field(default=[8, 16, 32], description="Truncation sweep")
    scaling_queries: int = Field(default=100, description="Queries timed per scaling row")


class LoggingConfig(BaseSettings):
    """Logging configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_LOG_", env_file=".env", extra="ignore")

    level: str = Field(default="INFO", description="Logging level")
    file_enabled: bool = Field(default=False, description="Enable file logging")
    file_path: str = Field(default="logs/event_turn_memory.log", description="Log file path")
    max_file_size: int = Field(
        default=10485760,  # 10MB
        description="Maximum log file size in bytes"
    )
    backup_count: int = Field(default=5, description="Number of log backup files to keep")


class PricingConfig(BaseSettings):
    """Cost reporting configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_PRICING_", env_file=".env", extra="ignore")

    path: Optional[Path] = Field(default=None, description="Pricing JSON file")
    construction_model: str = Field(
        default="gpt-4o-mini",
        description="Model billed for memory construction and retrieval"
    )
    answer_model: str = Field(default="gpt-5", description="Model billed for final answers")


class AppConfig(BaseSettings):
    """Main application configuration."""

    model_config = SettingsConfigDict(env_prefix="ETM_", env_file=".env", extra="ignore")

    environment: str = Field(default="development", description="Application environment")

    memory: MemoryConfig = Field(default_factory=MemoryConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    llm: LLMConfig = Field(default_factory=LLMConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    pricing: PricingConfig = Field(default_factory=PricingConfig)


@lru_cache()
def get_config() -> AppConfig:
    """Get cached application configuration."""
    return AppConfig()
