"""
Text helpers shared by the encoders, the stub provider and the metrics.
"""
import re
from collections import Counter
from typing import Iterable, List

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_WORD_RE = re.compile(r"[A-Za-z0-9]+")

STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just kind let me more most my
myself no nor not now of off on once only or other our ours ourselves out over
own said same she should so some such than that the their theirs them
themselves then there these they this those through to too under until up us
very was we were what when where which while who whom why will with would you
your yours yourself yourselves new yesterday today tomorrow
""".split())


def tokenize(text: str) -> List[str]:
    """Lowercase tokens split on non-alphanumeric boundaries."""
    return _TOKEN_RE.findall(text.lower())


def words(text: str) -> List[str]:
    """Alphanumeric words with their original casing."""
    return _WORD_RE.findall(text)


def content_tokens(text: str) -> List[str]:
    """Distinct non-stopword tokens in order of first appearance."""
    seen = set()
    result = []
    for token in tokenize(text):
        if token in STOPWORDS or token in seen:
            continue
        seen.add(token)
        result.append(token)
    return result


def top_terms(texts: Iterable[str], limit: int = 8) -> List[str]:
    """Most frequent content tokens across texts, ties broken by first appearance."""
    counts: Counter = Counter()
    first_seen = {}
    position = 0
    for text in texts:
        for token in tokenize(text):
            if token in STOPWORDS:
                continue
            counts[token] += 1
            if token not in first_seen:
                first_seen[token] = position
                position += 1
    ranked = sorted(counts, key=lambda token: (-counts[token], first_seen[token]))
    return ranked[:limit]


def _keyword_present(tokens: set, keyword: str) -> bool:
    parts = tokenize(keyword)
    return bool(parts) and all(part in tokens for part in parts)


def contains_any(text: str, keywords: Iterable[str]) -> bool:
    tokens = set(tokenize(text))
    return any(_keyword_present(tokens, keyword) for keyword in keywords)


def overlap(text: str, keywords: Iterable[str]) -> int:
    """Number of distinct keywords present in text."""
    tokens = set(tokenize(text))
    distinct = {" ".join(tokenize(keyword)) for keyword in keywords}
    return sum(1 for keyword in distinct if _keyword_present(tokens, keyword))
