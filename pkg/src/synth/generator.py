"""
Synthetic e-passage corpus with a known spanning structure.

Each passage draws a topic and L distinct concepts. Step j embeds concept c_j in
both modalities; target sentence k names the topic, concept c_k, then its
neighbours c_{k-1}, c_{k+1} (and further out for wider windows), and finally
filler tokens owned by c_k. The sentence for step k therefore depends on the
steps around k, which is the structure the span prior assumes.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from src.encoder.embedding_provider import EmbeddingProvider
from src.schema.models import (
    LEVELS,
    EPassage,
    ExperiencePair,
    ExperienceSequence,
    Relevance,
    SynthConfig,
    level_composition,
)
from src.utils.errors import SamplingError, ValidationError
from src.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

RANK3_NOISE_SCALE = 3.0

DistractorPool = List[Tuple[str, ExperiencePair]]


def sample_id_for(index: int) -> str:
    return f"p-{index:05d}"


def build_filler_table(cfg: SynthConfig) -> np.ndarray:
    """(n_concepts, sentence_len) filler ids; row c lists the fillers owned by concept c."""
    rng = derive_rng(cfg.seed, "fillers")
    return rng.integers(0, cfg.n_fillers, size=(cfg.n_concepts, cfg.sentence_len))


def sentence_for_step(
    k: int,
    topic_id: int,
    concept_ids: Sequence[int],
    cfg: SynthConfig,
    filler_table: np.ndarray,
) -> List[int]:
    """Token ids of target sentence k."""
    own = concept_ids[k]
    fillers = filler_table[own]
    tokens = [cfg.topic_token(topic_id), cfg.concept_token(own)]
    for distance in range(1, cfg.concepts_per_step // 2 + 1):
        for neighbour in (k - distance, k + distance):
            if 0 <= neighbour < len(concept_ids):
                tokens.append(cfg.concept_token(concept_ids[neighbour]))
            else:
                tokens.append(cfg.filler_token(int(fillers[len(tokens)])))
    while len(tokens) < cfg.sentence_len:
        tokens.append(cfg.filler_token(int(fillers[len(tokens)])))
    return tokens


def make_passage(
    index: int,
    cfg: SynthConfig,
    provider: EmbeddingProvider,
    filler_table: np.ndarray,
) -> EPassage:
    """The Level-5 e-passage with corpus index ``index``."""
    rng = derive_rng(cfg.seed, "passage", index)
    topic_id = int(rng.integers(cfg.n_topics))
    concept_ids = [int(c) for c in rng.choice(cfg.n_concepts, size=cfg.L, replace=False)]
    target = [sentence_for_step(k, topic_id, concept_ids, cfg, filler_table) for k in range(cfg.L)]
    return EPassage(
        input=provider.embed(topic_id, concept_ids, rng),
        target=target,
        level=5,
        sample_id=sample_id_for(index),
        topic_id=topic_id,
        concept_ids=concept_ids,
    )


def distractor_pool(passages: Sequence[EPassage]) -> DistractorPool:
    """Every Rank1 pair of every passage, tagged with its owner."""
    return [(p.sample_id, pair) for p in passages for pair in p.input.pairs]


def _with_relevance(pair: ExperiencePair, relevance: Relevance) -> ExperiencePair:
    return ExperiencePair(pair.image_embedding.copy(), pair.text_embedding.copy(), relevance)


def build_levels(
    passage: EPassage,
    pool: DistractorPool,
    rng: np.random.Generator,
    provider: EmbeddingProvider,
) -> List[EPassage]:
    """
    Expand a Level-5 passage into its five curriculum records, levels 5 down to 1.

    Rank1 slots keep the passage's own pairs, Rank3 slots re-embed the same
    concept with triple jitter, and negatives are pairs of other passages drawn
    without replacement. Mixed levels place their ranks at random steps.

    Raises:
        ValidationError: If the passage is not Level-5 or lacks concept ids
        SamplingError: If the pool holds too few foreign pairs
    """
    if passage.level != 5:
        raise ValidationError(
            f"{passage.sample_id}: build_levels needs a Level-5 passage, got {passage.level}"
        )
    if passage.concept_ids is None:
        raise ValidationError(
            f"{passage.sample_id}: concept ids are required to synthesise Rank3 pairs"
        )

    length = passage.input.length
    foreign = [pair for owner, pair in pool if owner != passage.sample_id]
    records = []
    for level in LEVELS:
        n_rank1, n_rank3, n_negative = level_composition(level, length)
        if n_negative > len(foreign):
            raise SamplingError(
                f"{passage.sample_id}: level {level} needs {n_negative} negatives, "
                f"pool has {len(foreign)}"
            )
        ranks = (
            [Relevance.RANK1] * n_rank1
            + [Relevance.RANK3] * n_rank3
            + [Relevance.NEGATIVE] * n_negative
        )
        if 0 < n_rank1 < length or 0 < n_rank3 < length:
            ranks = [ranks[i] for i in rng.permutation(length)]
        negatives = iter(rng.choice(len(foreign), size=n_negative, replace=False).tolist())

        pairs = []
        for step, rank in enumerate(ranks):
            if rank is Relevance.RANK1:
                pairs.append(_with_relevance(passage.input.pairs[step], Relevance.RANK1))
            elif rank is Relevance.RANK3:
                pairs.append(
                    provider.embed_pair(
                        passage.concept_ids[step], rng, Relevance.RANK3, noise_scale=RANK3_NOISE_SCALE
                    )
                )
            else:
                pairs.append(_with_relevance(foreign[next(negatives)], Relevance.NEGATIVE))

        records.append(
            EPassage(
                input=ExperienceSequence(passage.input.topic_embedding.copy(), pairs),
                target=[list(sentence) for sentence in passage.target],
                level=level,
                sample_id=passage.sample_id,
                topic_id=passage.topic_id,
                concept_ids=list(passage.concept_ids),
            )
        )
    return records


@dataclass
class SyntheticCorpus:
    """Level-5 training passages, held-out test passages and the generator state behind them."""

    config: SynthConfig
    provider: EmbeddingProvider
    filler_table: np.ndarray
    train: List[EPassage] = field(default_factory=list)
    test: List[EPassage] = field(default_factory=list)

    def curriculum(self) -> List[EPassage]:
        """All five levels of every training passage (5N records)."""
        pool = distractor_pool(self.train)
        records: List[EPassage] = []
        for index, passage in enumerate(self.train):
            rng = derive_rng(self.config.seed, "levels", index)
            records.extend(build_levels(passage, pool, rng, self.provider))
        return records

    def stats(self) -> Dict[str, Any]:
        lengths = [len(s) for p in self.train + self.test for s in p.target]
        return {
            "e_passages": len(self.train),
            "curriculum_samples": len(self.train) * len(LEVELS),
            "test_passages": len(self.test),
            "L": self.config.L,
            "vocab_size": self.config.vocab_size,
            "d_e": self.config.d_e,
            "concepts": self.config.n_concepts,
            "topics": self.config.n_topics,
            "avg_sentence_len": float(np.mean(lengths)) if lengths else 0.0,
            "seed": self.config.seed,
        }


def generate_corpus(cfg: SynthConfig) -> SyntheticCorpus:
    """
    Build the training and test passages for ``cfg``.

    Raises:
        ValidationError: If cfg is inconsistent, e.g. the vocabulary cannot hold
            topic markers, concept markers and at least one filler
    """
    cfg.validate()
    provider = EmbeddingProvider(cfg.d_e, cfg.n_concepts, cfg.n_topics, cfg.noise_std, cfg.seed)
    filler_table = build_filler_table(cfg)
    train = [make_passage(i, cfg, provider, filler_table) for i in range(cfg.n_passages)]
    test = [
        make_passage(i, cfg, provider, filler_table)
        for i in range(cfg.n_passages, cfg.n_passages + cfg.test_size)
    ]
    logger.info(f"Generated {len(train)} training and {len(test)} test passages (seed {cfg.seed})")
    return SyntheticCorpus(cfg, provider, filler_table, train, test)
