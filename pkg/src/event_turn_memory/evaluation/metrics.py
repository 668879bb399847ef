"""
Answer and evidence metrics.
"""
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

RANK_METHODS = ("average", "min", "dense")


def normalize_answer(text: str) -> str:
    """Lower text and remove punctuation, articles and extra whitespace."""
    def remove_articles(value):
        return re.sub(r"\b(a|an|the)\b", " ", value)

    def white_space_fix(value):
        return " ".join(value.split())

    def remove_punc(value):
        exclude = set(string.punctuation)
        return "".join(ch for ch in value if ch not in exclude)

    return white_space_fix(remove_articles(remove_punc(text.lower())))


def token_f1(prediction: str, gold: str) -> float:
    prediction_tokens = normalize_answer(prediction or "").split()
    gold_tokens = normalize_answer(gold or "").split()
    if not prediction_tokens or not gold_tokens:
        return float(prediction_tokens == gold_tokens)

    common = Counter(prediction_tokens) & Counter(gold_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(prediction_tokens)
    recall = num_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class EvidenceScore:
    """Per-question evidence quality; None marks an undefined value."""
    precision: Optional[float]
    recall: Optional[float]
    k: int


def evidence_metrics(retrieved: Iterable[int], gold: Iterable[int]) -> EvidenceScore:
    retrieved, gold = set(retrieved), set(gold)
    hits = len(retrieved & gold)
    precision = hits / len(retrieved) if retrieved else None
    recall = hits / len(gold) if gold else None
    return EvidenceScore(precision=precision, recall=recall, k=len(retrieved))


def macro_average(values: Iterable[Optional[float]]) -> Optional[float]:
    """Unweighted mean of the defined values; None when nothing is defined."""
    defined = [value for value in values if value is not None]
    if not defined:
        return None
    return float(np.mean(defined))


def category_rank(table: Union[pd.DataFrame, Mapping[str, Mapping[str, float]]],
                  method: str = "average") -> pd.Series:
    """
    Average category-wise rank per system (lower is better).

    ``table`` has one row per system and one column per category. Ranks are
    descending in F1; ``method`` decides how ties share ranks.
    """
    if method not in RANK_METHODS:
        raise ValueError(f"method must be one of {RANK_METHODS}")
    frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame.from_dict(table, orient="index")
    if len(frame.index) < 2:
        raise ValueError("ranking needs at least two systems")
    if frame.isna().any().any():
        raise ValueError("every system needs a score in every category")
    ranks = frame.rank(axis=0, ascending=False, method=method)
    return ranks.mean(axis=1)


def fixed_k_truncate(ranked_ids: Sequence[int], k: Optional[int]) -> List[int]:
    """First min(k, len) ids of a best-first list; ``None`` keeps everything."""
    if k is None:
        return list(ranked_ids)
    if k < 0:
        raise ValueError("k must be >= 0")
    return list(ranked_ids[:k])
