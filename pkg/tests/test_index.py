"""
Tests for the encoders and the cosine index.
"""
import numpy as np
import pytest

from event_turn_memory.encoders import (
    DistractorNoiseEncoder,
    HashingEncoder,
    build_encoder,
)
from event_turn_memory.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    DuplicateRegistrationError,
    EmbeddingIndexError,
    ZeroNormError,
)
from event_turn_memory.index import EmbeddingIndex, Layer, cosine


def brute_force_top_k(vectors, ids, query, k):
    scored = []
    for item_id, vector in zip(ids, vectors):
        if not np.linalg.norm(vector):
            continue
        scored.append((round(cosine(query, vector), 12), item_id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return scored[:k]


class TestEncoders:
    def test_hashing_is_deterministic_and_normalized(self):
        encoder = HashingEncoder(dimension=384)
        first = encoder.encode("I adopted a puppy named Oscar")
        second = HashingEncoder(dimension=384).encode("I adopted a puppy named Oscar")

        assert np.array_equal(first, second)
        assert np.linalg.norm(first) == pytest.approx(1.0)

    def test_shared_tokens_raise_cosine(self):
        encoder = HashingEncoder(dimension=384)
        base = encoder.encode("violin recital downtown")
        related = encoder.encode("the violin recital was lovely")
        unrelated = encoder.encode("pottery bowl glaze")

        assert cosine(base, related) > cosine(base, unrelated)

    def test_empty_text_gives_null_vector(self):
        assert not HashingEncoder(dimension=16).encode("!!!").any()

    def test_noise_encoder_is_deterministic_and_perturbs(self):
        base = HashingEncoder(dimension=384)
        noisy = DistractorNoiseEncoder(base, noise_scale=0.35)
        text = "camping by the lake"

        assert np.array_equal(noisy.encode(text), noisy.encode(text))
        assert cosine(noisy.encode(text), base.encode(text)) < 1.0
        assert np.linalg.norm(noisy.encode(text)) == pytest.approx(1.0)

    def test_build_encoder_round_trip(self):
        noisy = DistractorNoiseEncoder(HashingEncoder(dimension=64, seed=3), noise_scale=0.2, seed=3)
        rebuilt = build_encoder(noisy.describe())

        assert rebuilt.describe() == noisy.describe()
        assert np.array_equal(rebuilt.encode("same text"), noisy.encode("same text"))

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            build_encoder({"kind": "magic"})

    def test_remote_needs_endpoint(self):
        with pytest.raises(ConfigurationError, match="endpoint"):
            build_encoder({"kind": "remote"})


class TestCosine:
    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        assert cosine(a, b) == cosine(b, a)

    def test_scale_invariant(self):
        assert cosine([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_zero_norm(self):
        with pytest.raises(ZeroNormError):
            cosine([0, 0], [1, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine([1, 0, 0], [1, 0])


class TestEmbeddingIndex:
    @pytest.fixture
    def index(self):
        return EmbeddingIndex(HashingEncoder(dimension=16))

    def test_self_query_ranks_first(self, index):
        rng = np.random.default_rng(1)
        vectors = rng.standard_normal((20, 16))
        for item_id, vector in enumerate(vectors, start=1):
            index.register(Layer.TURN, item_id, vector)

        top = index.top_k(vectors[6], Layer.TURN, 3)
        assert top[0].id == 7
        assert top[0].score == pytest.approx(1.0)

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(42)
        vectors = rng.standard_normal((1000, 32))
        # exact duplicates force score ties
        vectors[500] = vectors[10]
        vectors[900] = vectors[10]
        vectors[77] = vectors[3]
        ids = list(range(1, 1001))

        index = EmbeddingIndex(HashingEncoder(dimension=32))
        for item_id, vector in zip(ids, vectors):
            index.register(Layer.TURN, item_id, vector)

        queries = [vectors[10], vectors[3]] + list(rng.standard_normal((20, 32)))
        for query in queries:
            for k in (1, 5, 10, 100):
                expected = brute_force_top_k(vectors, ids, query, k)
                actual = index.top_k(query, Layer.TURN, k)
                assert [hit.id for hit in actual] == [item_id for _, item_id in expected]
                assert [hit.score for hit in actual] == pytest.approx([s for s, _ in expected])

    def test_rescaling_keeps_order(self, index):
        rng = np.random.default_rng(8)
        vectors = rng.standard_normal((30, 16))
        scaled = EmbeddingIndex(HashingEncoder(dimension=16))
        for item_id, vector in enumerate(vectors, start=1):
            index.register(Layer.TURN, item_id, vector)
            scaled.register(Layer.TURN, item_id, vector * (item_id % 4 + 0.5))

        query = rng.standard_normal(16)
        assert [h.id for h in scaled.top_k(query, Layer.TURN, 10)] == \
            [h.id for h in index.top_k(query, Layer.TURN, 10)]

    def test_ties_broken_by_ascending_id(self, index):
        vector = np.ones(16)
        for item_id in (9, 4, 7):
            index.register(Layer.EVENT, item_id, vector)

        assert [hit.id for hit in index.top_k(vector, Layer.EVENT, 3)] == [4, 7, 9]

    def test_k_larger_than_layer(self, index):
        index.register(Layer.TURN, 1, np.ones(16))
        index.register(Layer.TURN, 2, -np.ones(16))

        assert [hit.id for hit in index.top_k(np.ones(16), Layer.TURN, 10)] == [1, 2]

    def test_empty_layer(self, index):
        assert index.top_k(np.ones(16), Layer.EVENT, 5) == []

    def test_null_vectors_excluded(self, index):
        index.register(Layer.TURN, 1, np.zeros(16))
        index.register(Layer.TURN, 2, np.ones(16))

        assert [hit.id for hit in index.top_k(np.ones(16), Layer.TURN, 5)] == [2]
        assert index.top_k(np.zeros(16), Layer.TURN, 5) == []

    def test_layers_are_independent(self, index):
        index.register(Layer.TURN, 1, np.ones(16))
        index.register(Layer.EVENT, 1, np.ones(16))

        assert index.size(Layer.TURN) == 1
        assert index.size(Layer.EVENT) == 1

    def test_duplicate_registration(self, index):
        index.register(Layer.TURN, 1, np.ones(16))
        with pytest.raises(DuplicateRegistrationError):
            index.register(Layer.TURN, 1, np.ones(16))

    def test_wrong_dimension(self, index):
        with pytest.raises(DimensionMismatchError):
            index.register(Layer.TURN, 1, np.ones(8))

    def test_invalid_k(self, index):
        with pytest.raises(EmbeddingIndexError, match="k must be"):
            index.top_k(np.ones(16), Layer.TURN, 0)

    def test_growth_beyond_initial_capacity(self, index):
        rng = np.random.default_rng(5)
        vectors = rng.standard_normal((300, 16))
        for item_id, vector in enumerate(vectors):
            index.register(Layer.TURN, item_id, vector)

        assert index.size(Layer.TURN) == 300
        assert np.array_equal(index.get_vector(Layer.TURN, 250), vectors[250])

    def test_replace(self, index):
        index.encode_and_register("first words", Layer.EVENT, 1)
        index.replace(Layer.EVENT, 1, "completely different")

        expected = index.encoder.encode("completely different")
        assert np.array_equal(index.get_vector(Layer.EVENT, 1), expected)

    def test_replace_unknown(self, index):
        with pytest.raises(EmbeddingIndexError):
            index.replace(Layer.EVENT, 5, "nothing")

    def test_export_import(self, index):
        rng = np.random.default_rng(2)
        for item_id in range(1, 6):
            index.register(Layer.TURN, item_id, rng.standard_normal(16))
        index.register(Layer.EVENT, 1, rng.standard_normal(16))

        restored = EmbeddingIndex(HashingEncoder(dimension=16))
        restored.import_state(index.export_state())

        assert restored.state_equals(index)
        query = rng.standard_normal(16)
        assert restored.top_k(query, Layer.TURN, 3) == index.top_k(query, Layer.TURN, 3)
