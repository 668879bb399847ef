"""
Storage and vector-search scaling of the two-level store.

Stores are built directly from fixed-size synthetic turns without LLM calls:
turn metadata comes from the text, and every ``event_size`` consecutive turns
form one event with a short fact per turn.
"""
import logging
import os
import tempfile
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import psutil
from tqdm import tqdm

from ..encoders import Encoder, HashingEncoder
from ..index import Layer
from ..ingestion import DialogueTurn, Ingestor
from ..store import FactSheetEntry, MemoryStore, Metadata, TurnNode
from ..utils.logging import log_performance
from ..utils.text import content_tokens, top_terms

logger = logging.getLogger(__name__)

FACT_WORDS = 3


def add_turns_directly(store: MemoryStore, turns: Sequence[DialogueTurn]) -> None:
    for turn in turns:
        metadata = Metadata(keywords=content_tokens(turn.text), timestamp=turn.timestamp,
                            source_timestamp=turn.timestamp)
        node = TurnNode(turn_id=turn.turn_id, speaker=turn.speaker, text=turn.text,
                        timestamp=turn.timestamp, metadata=metadata)
        node.embedding_id = store.embed_turn(turn.turn_id, Ingestor.embedding_text(node, metadata))
        store.insert_turn(node)


def add_events_directly(store: MemoryStore, event_size: int = 20) -> int:
    """Group consecutive turns into events; returns how many were created."""
    order = store.ingestion_order
    created = 0
    for start in range(0, len(order), event_size):
        members = [store.get_turn(turn_id) for turn_id in order[start:start + event_size]]
        summary = ", ".join(top_terms((turn.text for turn in members), limit=8))
        facts = [FactSheetEntry(turn_id=turn.turn_id, timestamp=turn.timestamp,
                                fact=" ".join(turn.text.split()[:FACT_WORDS]))
                 for turn in members]
        store.create_event(summary, facts, [turn.turn_id for turn in members])
        created += 1
    return created


def snapshot_size(store: MemoryStore) -> int:
    with tempfile.TemporaryDirectory() as directory:
        path = store.snapshot(Path(directory) / "store.snapshot")
        return os.path.getsize(path)


def median_query_latency(store: MemoryStore, queries: Sequence[str], k: int = 10) -> float:
    """Median wall time of one cosine top-k over the turn layer, in milliseconds."""
    vectors = [store.encoder.encode(query) for query in queries]
    timings = []
    for vector in vectors:
        start = time.perf_counter()
        store.index.top_k(vector, Layer.TURN, k)
        timings.append(time.perf_counter() - start)
    return float(np.median(timings) * 1000.0)


def rss_megabytes() -> float:
    return psutil.Process().memory_info().rss / (1024 * 1024)


def scaling_row(count: int, queries: int = 100, k: int = 10, event_size: int = 20,
                encoder: Optional[Encoder] = None, seed: int = 11) -> Dict[str, float]:
    from ..utils.data_generator import fixed_size_turns

    if count < 1:
        raise ValueError("turns must be >= 1")
    if queries < 1:
        raise ValueError("queries must be >= 1")
    turns = fixed_size_turns(count, seed=seed)
    store = MemoryStore(encoder or HashingEncoder(), conversation_id=f"scale-{count}")
    add_turns_directly(store, turns)
    turns_only = snapshot_size(store)

    add_events_directly(store, event_size)
    total = snapshot_size(store)

    rng = np.random.default_rng(seed + 1)
    picks = rng.integers(len(turns), size=queries)
    texts = [" ".join(turns[i].text.split()[:3]) for i in picks]
    latency = median_query_latency(store, texts, k)

    row = {
        "turns": count,
        "events": len(store.events),
        "snapshot_bytes": total,
        "turns_only_bytes": turns_only,
        "event_overhead": (total - turns_only) / turns_only,
        "median_latency_ms": latency,
        "rss_mb": rss_megabytes(),
    }
    logger.info(f"Scaling {count} turns: {total} bytes, overhead {row['event_overhead']:.1%}, "
                f"top-{k} median {latency:.3f} ms")
    return row


@log_performance
def scaling_harness(turn_counts: Sequence[int], queries: int = 100, k: int = 10,
                    event_size: int = 20, progress: bool = False) -> pd.DataFrame:
    """Snapshot bytes, event-layer overhead and top-k latency per store size."""
    if queries < 1:
        raise ValueError("queries must be >= 1")
    rows: List[Dict[str, float]] = [
        scaling_row(count, queries=queries, k=k, event_size=event_size)
        for count in tqdm(list(turn_counts), desc="Scaling", disable=not progress)
    ]
    columns = ["turns", "events", "snapshot_bytes", "turns_only_bytes", "event_overhead",
               "median_latency_ms", "rss_mb"]
    return pd.DataFrame(rows, columns=columns)
