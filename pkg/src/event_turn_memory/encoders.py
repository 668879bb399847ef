"""
Text encoders producing fixed-dimension dense vectors.
"""
import abc
import hashlib
import logging
import os
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import requests

from .exceptions import ConfigurationError, DimensionMismatchError, ProviderUnavailableError
from .utils.text import tokenize

logger = logging.getLogger(__name__)


class Encoder(abc.ABC):
    """Deterministic text → vector mapping of a fixed dimension."""

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ConfigurationError("encoder dimension must be >= 1")
        self.dimension = dimension

    @abc.abstractmethod
    def encode(self, text: str) -> np.ndarray:
        """Encode one text."""

    def encode_batch(self, texts: List[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack([self.encode(text) for text in texts])

    @abc.abstractmethod
    def describe(self) -> Dict[str, Any]:
        """Parameters needed to rebuild this encoder after a snapshot reload."""


class HashingEncoder(Encoder):
    """
    Signed feature-hashing encoder.

    Each lowercase token is hashed with a seeded blake2b digest to a bucket
    index and a sign; bucket counts are L2-normalized. Texts sharing tokens
    get a higher cosine, with no model dependency.
    """

    def __init__(self, dimension: int = 384, seed: int = 13):
        super().__init__(dimension)
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)
        self._bucket = lru_cache(maxsize=65536)(self._hash_token)

    def _hash_token(self, token: str) -> Tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        index = int.from_bytes(digest[:4], "little") % self.dimension
        sign = 1.0 if digest[4] & 1 else -1.0
        return index, sign

    def encode(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            index, sign = self._bucket(token)
            vector[index] += sign
        norm = np.linalg.norm(vector)
        if norm > 0:
            vector /= norm
        return vector

    def describe(self) -> Dict[str, Any]:
        return {"kind": "hashing", "dimension": self.dimension, "seed": self.seed}


class DistractorNoiseEncoder(Encoder):
    """
    Wraps a base encoder and blends in a text-seeded random unit vector.

    The noise is a deterministic function of the text, so identical texts
    still map to identical vectors, but lexical overlap no longer fully
    decides the ranking. Used to make single-layer retrieval imperfect on
    synthetic corpora.
    """

    def __init__(self, base: Optional[Encoder] = None, noise_scale: float = 0.35,
                 seed: int = 13):
        base = base or HashingEncoder(seed=seed)
        super().__init__(base.dimension)
        self.base = base
        self.noise_scale = noise_scale
        self.seed = seed

    def _noise(self, text: str) -> np.ndarray:
        digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8,
                                 key=self.seed.to_bytes(8, "little", signed=True)).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        noise = rng.standard_normal(self.dimension)
        return noise / np.linalg.norm(noise)

    def encode(self, text: str) -> np.ndarray:
        vector = self.base.encode(text)
        if not vector.any():
            return vector
        vector = vector + self.noise_scale * self._noise(text)
        return vector / np.linalg.norm(vector)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "noise", "dimension": self.dimension, "seed": self.seed,
                "noise_scale": self.noise_scale, "base": self.base.describe()}


class RemoteEmbeddingEncoder(Encoder):
    """Client for an OpenAI-compatible /embeddings endpoint."""

    def __init__(self, endpoint: str, model: str, dimension: int = 384,
                 api_key_env: str = "OPENAI_API_KEY", timeout: float = 30.0):
        super().__init__(dimension)
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._session = requests.Session()

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.getenv(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def encode_batch(self, texts: List[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        try:
            response = self._session.post(
                f"{self.endpoint}/embeddings",
                json={"model": self.model, "input": texts},
                headers=self._headers(),
                timeout=self.timeout,
            )
            response.raise_for_status()
            data = response.json()["data"]
        except (requests.RequestException, KeyError, ValueError) as e:
            raise ProviderUnavailableError(f"embedding request failed: {e}") from e

        vectors = np.asarray([item["embedding"] for item in data], dtype=np.float64)
        if vectors.shape[1] != self.dimension:
            raise DimensionMismatchError(self.dimension, vectors.shape[1])
        return vectors

    def encode(self, text: str) -> np.ndarray:
        return self.encode_batch([text])[0]

    def describe(self) -> Dict[str, Any]:
        return {"kind": "remote", "dimension": self.dimension, "endpoint": self.endpoint,
                "model": self.model, "api_key_env": self.api_key_env}


def build_encoder(params: Dict[str, Any]) -> Encoder:
    """Rebuild an encoder from ``Encoder.describe()`` output or settings values."""
    kind = params.get("kind", "hashing")
    dimension = int(params.get("dimension", 384))
    seed = int(params.get("seed", 13))

    if kind == "hashing":
        return HashingEncoder(dimension=dimension, seed=seed)
    if kind == "noise":
        base_params = params.get("base") or {"kind": "hashing", "dimension": dimension, "seed": seed}
        return DistractorNoiseEncoder(build_encoder(base_params),
                                      noise_scale=float(params.get("noise_scale", 0.35)),
                                      seed=seed)
    if kind == "remote":
        if not params.get("endpoint"):
            raise ConfigurationError("remote encoder needs an endpoint")
        return RemoteEmbeddingEncoder(params["endpoint"], params.get("model", "all-MiniLM-L6-v2"),
                                      dimension=dimension,
                                      api_key_env=params.get("api_key_env", "OPENAI_API_KEY"))
    raise ConfigurationError(f"unknown encoder kind {kind!r}")


def encoder_from_config(config) -> Encoder:
    """Build the encoder described by an ``EncoderConfig`` section."""
    return build_encoder(config.model_dump())
