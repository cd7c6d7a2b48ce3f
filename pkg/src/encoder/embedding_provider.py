"""
Synthetic experience encoder.

Stands in for a pretrained image/text encoder: every concept owns one random
unit prototype per modality, and an embedding is the prototype plus Gaussian
jitter, renormalised. Train and test data go through the same provider.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.schema.models import ExperiencePair, ExperienceSequence, Relevance
from src.utils.errors import DimensionError, UnknownConceptError, ValidationError
from src.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

MAX_PROTOTYPE_COSINE = 0.9
MAX_DRAWS_PER_PROTOTYPE = 1000

# Nearest-prototype decoding of Rank1 embeddings is exact at or below this jitter.
RECOVERABLE_NOISE_STD = 0.05

MODALITIES = ("image", "text")


def normalize(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if norm == 0:
        raise ValidationError("cannot normalise a zero vector")
    return vector / norm


@dataclass
class PrototypeTable:
    """Row i is the unit prototype of id i; rows are pairwise non-collinear."""

    vectors: np.ndarray

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def generate(
        cls,
        rng: np.random.Generator,
        count: int,
        dim: int,
        max_cosine: float = MAX_PROTOTYPE_COSINE,
    ) -> "PrototypeTable":
        """
        Draw ``count`` random unit vectors, rejecting any whose |cosine| with an
        earlier row reaches ``max_cosine``.

        Raises:
            ValidationError: If the table cannot be filled (dimension too small)
        """
        rows: list = []
        for i in range(count):
            for _ in range(MAX_DRAWS_PER_PROTOTYPE):
                candidate = normalize(rng.standard_normal(dim))
                if not rows or np.max(np.abs(np.stack(rows) @ candidate)) < max_cosine:
                    rows.append(candidate)
                    break
            else:
                raise ValidationError(
                    f"could not place prototype {i} of {count} in {dim} dimensions "
                    f"with |cosine| < {max_cosine}"
                )
        return cls(vectors=np.stack(rows) if rows else np.zeros((0, dim)))

    def lookup(self, index: int) -> np.ndarray:
        if not 0 <= index < self.size:
            raise UnknownConceptError(f"unknown id {index} (table holds {self.size})")
        return self.vectors[index]

    def nearest(self, vector: np.ndarray) -> int:
        """Id of the prototype with the largest cosine similarity."""
        return int(np.argmax(self.vectors @ normalize(np.asarray(vector, dtype=np.float64))))

    def max_pairwise_cosine(self) -> float:
        if self.size < 2:
            return 0.0
        gram = np.abs(self.vectors @ self.vectors.T)
        np.fill_diagonal(gram, 0.0)
        return float(gram.max())


class EmbeddingProvider:
    """
    Deterministic concept → embedding encoder with optional jitter.

    Usage:
    ```python
    provider = EmbeddingProvider(d_e=64, n_concepts=64, n_topics=16, noise_std=0.02, seed=7)
    sequence = provider.embed(topic_id=3, concept_ids=[4, 9, 1, 0, 7], rng=rng)
    ```
    """

    def __init__(self, d_e: int, n_concepts: int, n_topics: int, noise_std: float = 0.0, seed: int = 0):
        if noise_std < 0:
            raise ValidationError(f"noise_std must be non-negative, got {noise_std}")
        self.d_e = d_e
        self.noise_std = noise_std
        self.seed = seed
        self.tables = {
            modality: PrototypeTable.generate(derive_rng(seed, "prototypes", modality), n_concepts, d_e)
            for modality in MODALITIES
        }
        self.topics = PrototypeTable.generate(derive_rng(seed, "prototypes", "topic"), n_topics, d_e)
        if noise_std > RECOVERABLE_NOISE_STD:
            logger.warning(
                f"noise_std {noise_std} exceeds {RECOVERABLE_NOISE_STD}; "
                "concepts may not be recoverable"
            )

    @property
    def n_concepts(self) -> int:
        return self.tables["image"].size

    def _jitter(
        self, prototype: np.ndarray, rng: Optional[np.random.Generator], scale: float
    ) -> np.ndarray:
        std = self.noise_std * scale
        if rng is None or std == 0:
            return prototype.copy()
        return normalize(prototype + std * rng.standard_normal(self.d_e))

    def embed_concept(
        self,
        concept_id: int,
        modality: str,
        rng: Optional[np.random.Generator] = None,
        noise_scale: float = 1.0,
    ) -> np.ndarray:
        """
        Unit embedding of one concept in one modality.

        Args:
            concept_id: Concept index
            modality: "image" or "text"
            rng: Jitter source; None disables jitter
            noise_scale: Multiplier on noise_std (3.0 for Rank3 candidates)

        Raises:
            UnknownConceptError: If concept_id is outside the table
        """
        if modality not in self.tables:
            raise ValidationError(f"unknown modality '{modality}'")
        return self._jitter(self.tables[modality].lookup(concept_id), rng, noise_scale)

    def embed_topic(self, topic_id: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return self._jitter(self.topics.lookup(topic_id), rng, 1.0)

    def embed_pair(
        self,
        concept_id: int,
        rng: Optional[np.random.Generator] = None,
        relevance: Relevance = Relevance.RANK1,
        noise_scale: float = 1.0,
    ) -> ExperiencePair:
        return ExperiencePair(
            image_embedding=self.embed_concept(concept_id, "image", rng, noise_scale),
            text_embedding=self.embed_concept(concept_id, "text", rng, noise_scale),
            relevance=relevance,
        )

    def embed(
        self,
        topic_id: int,
        concept_ids: Sequence[int],
        rng: Optional[np.random.Generator] = None,
    ) -> ExperienceSequence:
        """Embed a topic and its ordered concepts as Rank1 pairs."""
        return ExperienceSequence(
            topic_embedding=self.embed_topic(topic_id, rng),
            pairs=[self.embed_pair(c, rng) for c in concept_ids],
        )

    def embed_vectors(
        self,
        topic: Sequence[float],
        images: Sequence[Sequence[float]],
        texts: Sequence[Sequence[float]],
    ) -> ExperienceSequence:
        """
        Wrap raw test-time vectors, normalising each to unit length.

        Raises:
            DimensionError: If any vector is not d_e-dimensional
            ValidationError: If the image and text step counts differ
        """
        topic_vec = np.asarray(topic, dtype=np.float64)
        image_mat = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
        text_mat = np.asarray(texts, dtype=np.float64).reshape(len(texts), -1)
        if len(image_mat) != len(text_mat):
            raise ValidationError(f"{len(image_mat)} image steps but {len(text_mat)} text steps")
        for arr in (topic_vec[None, :], image_mat, text_mat):
            if arr.shape[-1] != self.d_e:
                raise DimensionError(f"embedding provider expects d_e={self.d_e}", arr.shape)
        return ExperienceSequence(
            topic_embedding=normalize(topic_vec),
            pairs=[
                ExperiencePair(normalize(img), normalize(txt))
                for img, txt in zip(image_mat, text_mat)
            ],
        )

    def decode(self, vector: np.ndarray, modality: str) -> int:
        """Nearest-prototype concept id of an embedding."""
        return self.tables[modality].nearest(vector)
