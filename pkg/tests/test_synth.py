"""
Unit tests for the synthetic corpus

Tests:
- EmbeddingProvider: prototypes, jitter, nearest-prototype decoding
- Target sentences: topic and concept markers with the spanning window
- Curriculum levels: composition, shared targets, negatives
- generate_corpus: determinism, splits, stats
"""

from dataclasses import replace

import numpy as np
import pytest

from src.encoder.embedding_provider import EmbeddingProvider, PrototypeTable
from src.schema.models import LEVELS, Relevance, level_composition
from src.synth.generator import (
    build_levels,
    distractor_pool,
    generate_corpus,
    sentence_for_step,
)
from src.utils.errors import DimensionError, SamplingError, UnknownConceptError, ValidationError


# ============================================================================
# FIXTURES
# ============================================================================


@pytest.fixture
def provider():
    return EmbeddingProvider(d_e=8, n_concepts=12, n_topics=3, noise_std=0.02, seed=5)


# ============================================================================
# TEST: EmbeddingProvider
# ============================================================================


class TestEmbeddingProvider:
    """Test the synthetic experience encoder"""

    def test_prototypes_are_unit_and_separated(self, provider):
        for table in list(provider.tables.values()) + [provider.topics]:
            np.testing.assert_allclose(np.linalg.norm(table.vectors, axis=1), 1.0)
            assert table.max_pairwise_cosine() < 0.9

    def test_embeddings_are_unit_norm(self, provider, rng):
        pair = provider.embed_pair(4, rng, Relevance.RANK3, noise_scale=3.0)
        assert pair.is_unit_norm()
        assert pair.relevance is Relevance.RANK3

    def test_no_rng_means_no_jitter(self, provider):
        np.testing.assert_array_equal(
            provider.embed_concept(2, "text"), provider.tables["text"].vectors[2]
        )

    def test_nearest_prototype_recovers_concept(self, provider, rng):
        for concept in range(provider.n_concepts):
            pair = provider.embed_pair(concept, rng)
            assert provider.decode(pair.image_embedding, "image") == concept
            assert provider.decode(pair.text_embedding, "text") == concept

    def test_same_seed_same_tables(self):
        a = EmbeddingProvider(d_e=8, n_concepts=12, n_topics=3, seed=9)
        b = EmbeddingProvider(d_e=8, n_concepts=12, n_topics=3, seed=9)
        np.testing.assert_array_equal(a.tables["image"].vectors, b.tables["image"].vectors)

    def test_unknown_concept(self, provider):
        with pytest.raises(UnknownConceptError):
            provider.embed_concept(12, "image")

    def test_unknown_modality(self, provider):
        with pytest.raises(ValidationError):
            provider.embed_concept(0, "audio")

    def test_embed_keeps_concept_order(self, provider):
        sequence = provider.embed(topic_id=2, concept_ids=[7, 0, 3])

        np.testing.assert_array_equal(sequence.topic_embedding, provider.topics.vectors[2])
        assert [provider.decode(p.image_embedding, "image") for p in sequence.pairs] == [7, 0, 3]
        assert all(p.relevance is Relevance.RANK1 for p in sequence.pairs)

    def test_embed_vectors_normalises(self, provider):
        sequence = provider.embed_vectors(np.ones(8), [np.full(8, 2.0)] * 3, [np.arange(1, 9)] * 3)
        assert sequence.length == 3
        assert all(pair.is_unit_norm() for pair in sequence.pairs)

    def test_embed_vectors_dimension(self, provider):
        with pytest.raises(DimensionError):
            provider.embed_vectors(np.ones(4), [np.ones(4)], [np.ones(4)])
        with pytest.raises(ValidationError):
            provider.embed_vectors(np.ones(8), [np.ones(8)] * 2, [np.ones(8)])

    def test_table_too_crowded(self, rng):
        with pytest.raises(ValidationError):
            PrototypeTable.generate(rng, count=50, dim=2)


# ============================================================================
# TEST: Target sentences
# ============================================================================


class TestTargetSentences:
    """Test the spanning structure of target sentences"""

    def test_topic_then_own_concept(self, tiny_corpus, tiny_synth_config):
        cfg = tiny_synth_config
        for passage in tiny_corpus.train:
            for k, sentence in enumerate(passage.target):
                assert sentence[0] == cfg.topic_token(passage.topic_id)
                assert sentence[1] == cfg.concept_token(passage.concept_ids[k])
                assert len(sentence) == cfg.sentence_len

    def test_neighbours_are_named(self, tiny_corpus, tiny_synth_config):
        cfg = tiny_synth_config
        passage = tiny_corpus.train[0]
        middle = passage.target[1]
        assert middle[2] == cfg.concept_token(passage.concept_ids[0])
        assert middle[3] == cfg.concept_token(passage.concept_ids[2])

    def test_boundary_uses_filler(self, tiny_synth_config):
        cfg = tiny_synth_config
        table = np.zeros((cfg.n_concepts, cfg.sentence_len), dtype=int)

        first = sentence_for_step(0, 1, [4, 5, 6], cfg, table)

        assert first[:4] == [
            cfg.topic_token(1),
            cfg.concept_token(4),
            cfg.filler_token(0),
            cfg.concept_token(5),
        ]

    def test_tokens_in_vocabulary(self, tiny_corpus, tiny_synth_config):
        for passage in tiny_corpus.train + tiny_corpus.test:
            passage.validate(tiny_synth_config.L, tiny_synth_config.vocab_size)


# ============================================================================
# TEST: Curriculum levels
# ============================================================================


class TestCurriculumLevels:
    """Test the five relevance levels built from each passage"""

    def test_level_composition_table(self):
        assert level_composition(5) == (5, 0, 0)
        assert level_composition(4) == (3, 1, 1)
        assert level_composition(3) == (0, 5, 0)
        assert level_composition(2) == (1, 1, 3)
        assert level_composition(1) == (0, 0, 5)
        assert level_composition(4, 3) == (1, 1, 1)
        assert level_composition(2, 3) == (1, 1, 1)

    def test_level_composition_invalid(self):
        with pytest.raises(ValidationError):
            level_composition(6)
        with pytest.raises(ValidationError):
            level_composition(4, 1)

    def test_five_records_per_passage(self, tiny_corpus, tiny_curriculum):
        assert len(tiny_curriculum) == len(LEVELS) * len(tiny_corpus.train)
        assert len({record.key for record in tiny_curriculum}) == len(tiny_curriculum)

    def test_counts_match_levels(self, tiny_curriculum):
        for record in tiny_curriculum:
            assert record.relevance_counts() == level_composition(record.level, 3)

    def test_levels_share_target(self, tiny_corpus, tiny_curriculum):
        for passage in tiny_corpus.train:
            records = [r for r in tiny_curriculum if r.sample_id == passage.sample_id]
            assert sorted(r.level for r in records) == [1, 2, 3, 4, 5]
            assert all(r.target == passage.target for r in records)

    def test_level5_keeps_original_pairs(self, tiny_corpus, tiny_curriculum):
        originals = {p.sample_id: p for p in tiny_corpus.train}
        for record in tiny_curriculum:
            if record.level == 5:
                assert record.input == originals[record.sample_id].input

    def test_negatives_come_from_other_passages(self, tiny_corpus, tiny_curriculum):
        originals = {p.sample_id: p for p in tiny_corpus.train}
        for record in tiny_curriculum:
            own = originals[record.sample_id].input.pairs
            for pair in record.input.pairs:
                if pair.relevance is Relevance.NEGATIVE:
                    assert not any(
                        np.array_equal(pair.image_embedding, o.image_embedding) for o in own
                    )

    def test_rank3_pairs_are_fresh_unit_embeddings(self, tiny_corpus, tiny_curriculum):
        originals = {p.sample_id: p for p in tiny_corpus.train}
        for record in tiny_curriculum:
            if record.level == 3:
                own = originals[record.sample_id].input.pairs
                for pair, original in zip(record.input.pairs, own):
                    assert pair.is_unit_norm()
                    assert not np.array_equal(pair.image_embedding, original.image_embedding)

    def test_pool_too_small(self, tiny_corpus, rng):
        passage = tiny_corpus.train[0]
        with pytest.raises(SamplingError):
            build_levels(passage, distractor_pool([passage]), rng, tiny_corpus.provider)

    def test_needs_level5_input(self, tiny_corpus, tiny_curriculum, rng):
        lower = next(r for r in tiny_curriculum if r.level == 3)
        with pytest.raises(ValidationError):
            build_levels(lower, distractor_pool(tiny_corpus.train), rng, tiny_corpus.provider)


# ============================================================================
# TEST: generate_corpus
# ============================================================================


class TestGenerateCorpus:
    """Test corpus generation end to end"""

    def test_deterministic(self, tiny_synth_config):
        first = generate_corpus(tiny_synth_config)
        second = generate_corpus(tiny_synth_config)
        assert first.train == second.train
        assert first.test == second.test
        assert first.curriculum() == second.curriculum()

    def test_seed_changes_corpus(self, tiny_synth_config):
        other = generate_corpus(replace(tiny_synth_config, seed=8))
        assert other.train != generate_corpus(tiny_synth_config).train

    def test_splits(self, tiny_corpus, tiny_synth_config):
        assert len(tiny_corpus.train) == tiny_synth_config.n_passages
        assert len(tiny_corpus.test) == tiny_synth_config.test_size
        train_ids = {p.sample_id for p in tiny_corpus.train}
        assert train_ids.isdisjoint(p.sample_id for p in tiny_corpus.test)

    def test_distinct_concepts_per_passage(self, tiny_corpus):
        for passage in tiny_corpus.train:
            assert len(set(passage.concept_ids)) == len(passage.concept_ids)

    def test_noise_free_corpus_decodes_exactly(self, tiny_synth_config):
        corpus = generate_corpus(replace(tiny_synth_config, noise_std=0.0))
        for passage in corpus.train:
            decoded = [corpus.provider.decode(p.text_embedding, "text") for p in passage.input.pairs]
            assert decoded == passage.concept_ids

    def test_stats(self, tiny_corpus):
        stats = tiny_corpus.stats()
        assert stats["e_passages"] == 4
        assert stats["curriculum_samples"] == 20
        assert stats["test_passages"] == 2
        assert stats["avg_sentence_len"] == pytest.approx(5.0)

    def test_vocabulary_too_small(self, tiny_synth_config):
        with pytest.raises(ValidationError):
            generate_corpus(replace(tiny_synth_config, vocab_size=18))

    def test_even_window_rejected(self, tiny_synth_config):
        with pytest.raises(ValidationError):
            generate_corpus(replace(tiny_synth_config, concepts_per_step=2))
