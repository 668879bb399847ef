"""
Exact cosine top-k over the turn and event layers.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from .encoders import Encoder
from .exceptions import (
    DimensionMismatchError,
    DuplicateRegistrationError,
    EmbeddingIndexError,
    ZeroNormError,
)

logger = logging.getLogger(__name__)

# Scores are rounded before ranking so equal vectors tie exactly.
SCORE_DECIMALS = 12


class Layer(str, Enum):
    TURN = "turn"
    EVENT = "event"


@dataclass(frozen=True)
class ScoredId:
    id: int
    score: float


def _as_vector(values, dimension: Optional[int] = None) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64).reshape(-1)
    if dimension is not None and vector.shape[0] != dimension:
        raise DimensionMismatchError(dimension, vector.shape[0])
    if not np.all(np.isfinite(vector)):
        raise EmbeddingIndexError("embedding components must be finite")
    return vector


def cosine(a, b) -> float:
    """a·b / (‖a‖‖b‖); symmetric in its arguments."""
    a = _as_vector(a)
    b = _as_vector(b, a.shape[0])
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise ZeroNormError()
    # Normalizing first keeps the product order-independent.
    return float(np.dot(a / norm_a, b / norm_b))


class _LayerMatrix:
    """Growable row store for one layer."""

    def __init__(self, dimension: int, capacity: int = 64):
        self.dimension = dimension
        self.ids: List[int] = []
        self.positions: Dict[int, int] = {}
        self.matrix = np.zeros((capacity, dimension), dtype=np.float64)
        self.norms = np.zeros(capacity, dtype=np.float64)
        self._id_array = np.zeros(capacity, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.ids)

    def _grow(self):
        capacity = max(1, self.matrix.shape[0]) * 2
        matrix = np.zeros((capacity, self.dimension), dtype=np.float64)
        matrix[:len(self)] = self.matrix[:len(self)]
        norms = np.zeros(capacity, dtype=np.float64)
        norms[:len(self)] = self.norms[:len(self)]
        id_array = np.zeros(capacity, dtype=np.int64)
        id_array[:len(self)] = self._id_array[:len(self)]
        self.matrix, self.norms, self._id_array = matrix, norms, id_array

    def add(self, item_id: int, vector: np.ndarray):
        if len(self) == self.matrix.shape[0]:
            self._grow()
        row = len(self)
        self.matrix[row] = vector
        self.norms[row] = np.linalg.norm(vector)
        self._id_array[row] = item_id
        self.positions[item_id] = row
        self.ids.append(item_id)

    def load(self, ids, vectors: np.ndarray):
        count = len(ids)
        capacity = max(64, count)
        self.matrix = np.zeros((capacity, self.dimension), dtype=np.float64)
        self.matrix[:count] = vectors
        self.norms = np.zeros(capacity, dtype=np.float64)
        self.norms[:count] = np.linalg.norm(vectors, axis=1) if count else 0.0
        self._id_array = np.zeros(capacity, dtype=np.int64)
        self._id_array[:count] = ids
        self.ids = [int(item_id) for item_id in ids]
        self.positions = {item_id: row for row, item_id in enumerate(self.ids)}

    def set(self, item_id: int, vector: np.ndarray):
        row = self.positions[item_id]
        self.matrix[row] = vector
        self.norms[row] = np.linalg.norm(vector)

    @property
    def active_matrix(self) -> np.ndarray:
        return self.matrix[:len(self)]

    @property
    def active_norms(self) -> np.ndarray:
        return self.norms[:len(self)]

    @property
    def active_ids(self) -> np.ndarray:
        return self._id_array[:len(self)]


class EmbeddingIndex:
    """Brute-force cosine index with a turn layer and an event layer."""

    def __init__(self, encoder: Encoder):
        self.encoder = encoder
        self.dimension = encoder.dimension
        self._layers = {layer: _LayerMatrix(self.dimension) for layer in Layer}

    def size(self, layer: Layer) -> int:
        return len(self._layers[Layer(layer)])

    def contains(self, layer: Layer, item_id: int) -> bool:
        return item_id in self._layers[Layer(layer)].positions

    def register(self, layer: Layer, item_id: int, vector) -> str:
        layer = Layer(layer)
        store = self._layers[layer]
        if item_id in store.positions:
            raise DuplicateRegistrationError(layer.value, item_id)
        store.add(item_id, _as_vector(vector, self.dimension))
        return f"{layer.value}:{item_id}"

    def encode_and_register(self, text: str, layer: Layer, item_id: int) -> str:
        """Encode text and store it under item_id; returns the embedding handle."""
        if self.contains(layer, item_id):
            raise DuplicateRegistrationError(Layer(layer).value, item_id)
        return self.register(layer, item_id, self.encoder.encode(text))

    def replace(self, layer: Layer, item_id: int, text: str):
        """Re-encode an existing entry (stale event embeddings)."""
        layer = Layer(layer)
        store = self._layers[layer]
        if item_id not in store.positions:
            raise EmbeddingIndexError(f"{item_id!r} is not registered in the {layer.value} layer")
        store.set(item_id, _as_vector(self.encoder.encode(text), self.dimension))

    def get_vector(self, layer: Layer, item_id: int) -> np.ndarray:
        store = self._layers[Layer(layer)]
        return store.matrix[store.positions[item_id]].copy()

    def scores(self, query, layer: Layer) -> np.ndarray:
        """Rounded cosine of query against every row; null rows get -inf."""
        store = self._layers[Layer(layer)]
        q = _as_vector(query, self.dimension)
        q_norm = np.linalg.norm(q)
        norms = store.active_norms
        if q_norm == 0:
            return np.full(len(store), -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = (store.active_matrix @ q) / (norms * q_norm)
        raw = np.round(raw, SCORE_DECIMALS)
        raw[norms == 0] = -np.inf
        return raw

    def top_k(self, query, layer: Layer, k: int) -> List[ScoredId]:
        """
        Top-k ids by cosine, descending, ties broken by ascending id.

        Null embeddings never appear; a null query returns [].
        """
        if k < 1:
            raise EmbeddingIndexError("k must be >= 1")
        store = self._layers[Layer(layer)]
        if len(store) == 0:
            _as_vector(query, self.dimension)
            return []

        scores = self.scores(query, layer)
        ids = store.active_ids
        valid = np.flatnonzero(np.isfinite(scores))
        if valid.size == 0:
            return []

        scores, ids = scores[valid], ids[valid]
        if k < scores.size:
            # Keep everything tied with the k-th best so the id tie-break stays exact.
            threshold = -np.partition(-scores, k - 1)[k - 1]
            keep = np.flatnonzero(scores >= threshold)
            scores, ids = scores[keep], ids[keep]

        order = np.lexsort((ids, -scores))[:k]
        return [ScoredId(int(ids[i]), float(scores[i])) for i in order]

    def export_state(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {
            layer.value: {
                "ids": store.active_ids.copy(),
                "vectors": store.active_matrix.copy(),
            }
            for layer, store in self._layers.items()
        }

    def import_state(self, state: Dict[str, Dict[str, np.ndarray]]):
        layers = {layer: _LayerMatrix(self.dimension) for layer in Layer}
        for layer, store in layers.items():
            vectors = np.asarray(state[layer.value]["vectors"], dtype=np.float64)
            ids = np.asarray(state[layer.value]["ids"], dtype=np.int64)
            if vectors.size and vectors.shape[1] != self.dimension:
                raise DimensionMismatchError(self.dimension, vectors.shape[1])
            store.load(ids, vectors.reshape(len(ids), self.dimension))
        self._layers = layers

    def state_equals(self, other: "EmbeddingIndex") -> bool:
        for layer in Layer:
            mine, theirs = self._layers[layer], other._layers[layer]
            if mine.ids != theirs.ids:
                return False
            if not np.array_equal(mine.active_matrix, theirs.active_matrix):
                return False
        return True
