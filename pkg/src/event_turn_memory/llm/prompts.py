"""
Prompt families and the template library that renders them.
"""
import logging
import re
from enum import Enum
from pathlib import Path
from typing import Dict, Mapping, Optional, Set, Type

from pydantic import BaseModel

from ..config.settings import PROMPTS_DIR
from ..exceptions import MissingVariableError, UnknownFamilyError
from . import schemas

logger = logging.getLogger(__name__)

NOT_MENTIONED = "Not mentioned in the conversation"
CATEGORIES = ("single_hop", "multi_hop", "temporal", "open_domain", "adversarial")

_PLACEHOLDER = re.compile(r"\{\{\s*([a-zA-Z_][a-zA-Z0-9_]*)\s*\}\}")


class PromptFamily(str, Enum):
    TURN_ANALYSIS = "turn_analysis"
    EVENT_AFFILIATION = "event_affiliation"
    EVENT_REFRESH = "event_refresh"
    FACT_APPEND = "fact_append"
    QUERY_KEYWORDS = "query_keywords"
    EVENT_LOCAL_SELECTION = "event_local_selection"
    EVIDENCE_FILTER = "evidence_filter"
    FINAL_QA = "final_qa"

    @property
    def stage(self) -> str:
        return FAMILY_STAGES[self]

    @property
    def schema(self) -> Type[BaseModel]:
        return FAMILY_SCHEMAS[self]


FAMILY_STAGES: Dict[PromptFamily, str] = {
    PromptFamily.TURN_ANALYSIS: "memory_construction",
    PromptFamily.EVENT_AFFILIATION: "memory_construction",
    PromptFamily.EVENT_REFRESH: "memory_construction",
    PromptFamily.FACT_APPEND: "memory_construction",
    PromptFamily.QUERY_KEYWORDS: "retrieval",
    PromptFamily.EVENT_LOCAL_SELECTION: "retrieval",
    PromptFamily.EVIDENCE_FILTER: "retrieval",
    PromptFamily.FINAL_QA: "answer",
}

FAMILY_SCHEMAS: Dict[PromptFamily, Type[BaseModel]] = {
    PromptFamily.TURN_ANALYSIS: schemas.TurnAnalysis,
    PromptFamily.EVENT_AFFILIATION: schemas.Affiliation,
    PromptFamily.EVENT_REFRESH: schemas.EventRefresh,
    PromptFamily.FACT_APPEND: schemas.FactAppend,
    PromptFamily.QUERY_KEYWORDS: schemas.QueryKeywords,
    PromptFamily.EVENT_LOCAL_SELECTION: schemas.TurnSelection,
    PromptFamily.EVIDENCE_FILTER: schemas.TurnSelection,
    PromptFamily.FINAL_QA: schemas.Answer,
}


def as_family(family) -> PromptFamily:
    try:
        return PromptFamily(family)
    except ValueError:
        raise UnknownFamilyError(family) from None


def family_label(family: PromptFamily, category: Optional[str] = None) -> str:
    """Call-log label, e.g. ``final_qa:temporal``."""
    return f"{family.value}:{category}" if family is PromptFamily.FINAL_QA else family.value


class PromptLibrary:
    """Loads ``{{variable}}`` templates from a directory, one file per family."""

    def __init__(self, prompts_dir: Optional[Path] = None):
        self.prompts_dir = Path(prompts_dir) if prompts_dir else PROMPTS_DIR
        self._cache: Dict[str, str] = {}

    def _key(self, family, category: Optional[str]) -> str:
        family = as_family(family)
        if family is PromptFamily.FINAL_QA:
            if category not in CATEGORIES:
                raise UnknownFamilyError(f"final_qa:{category}")
            return f"final_qa_{category}"
        return family.value

    def template(self, family, category: Optional[str] = None) -> str:
        key = self._key(family, category)
        if key not in self._cache:
            path = self.prompts_dir / f"{key}.txt"
            if not path.exists():
                raise UnknownFamilyError(key)
            self._cache[key] = path.read_text(encoding="utf-8")
        return self._cache[key]

    def variables(self, family, category: Optional[str] = None) -> Set[str]:
        return set(_PLACEHOLDER.findall(self.template(family, category)))

    def render(self, family, variables: Mapping[str, object],
               category: Optional[str] = None) -> str:
        template = self.template(family, category)
        for name in _PLACEHOLDER.findall(template):
            if name not in variables or variables[name] is None:
                raise MissingVariableError(self._key(family, category), name)
        return _PLACEHOLDER.sub(lambda match: str(variables[match.group(1)]), template)
