"""
Structured output schemas, one per prompt family.
"""
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class _Output(BaseModel):
    model_config = {"extra": "ignore"}


class TurnAnalysis(_Output):
    keywords: List[str] = Field(min_length=1)
    tags: List[str] = Field(default_factory=list)
    context: str = ""
    timestamp: str = ""

    @field_validator("keywords")
    @classmethod
    def _clean_keywords(cls, value: List[str]) -> List[str]:
        cleaned = [keyword.strip() for keyword in value if keyword and keyword.strip()]
        if not cleaned:
            raise ValueError("keywords must contain at least one term")
        return cleaned


class Affiliation(_Output):
    event_ids: List[int] = Field(default_factory=list)
    new_event: bool = False
    summary: Optional[str] = None


class FactLine(_Output):
    turn_id: int
    timestamp: str = ""
    fact: str = Field(min_length=1)


class EventRefresh(_Output):
    summary: str = Field(min_length=1)
    facts: List[FactLine] = Field(default_factory=list)


class FactAppend(_Output):
    fact: str = Field(min_length=1)


class QueryKeywords(_Output):
    keywords: List[str] = Field(default_factory=list)


class TurnSelection(_Output):
    turn_ids: List[int] = Field(default_factory=list)


class Answer(_Output):
    answer: str
