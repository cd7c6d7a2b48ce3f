"""Domain records: experiences, e-passages, generated passages and the corpus config."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.utils.errors import DimensionError, ValidationError

# Reserved vocabulary ids; topic markers, concept markers and fillers follow.
PAD_ID = 0
BOS_ID = 1
SEP_ID = 2
NUM_SPECIAL_TOKENS = 3

LEVELS = (5, 4, 3, 2, 1)
UNIT_NORM_TOLERANCE = 1e-6


class Relevance(str, Enum):
    """How well an experience pair matches the sentence it sits under."""

    RANK1 = "Rank1"
    RANK3 = "Rank3"
    NEGATIVE = "RandomNegative"


def level_composition(level: int, length: int = 5) -> Tuple[int, int, int]:
    """
    (Rank1, Rank3, RandomNegative) counts of a curriculum level.

    For L = 5: 5 → (5,0,0), 4 → (3,1,1), 3 → (0,5,0), 2 → (1,1,3), 1 → (0,0,5).
    Levels 4 and 2 keep one Rank3 and one minority pair for any L >= 2.

    Raises:
        ValidationError: On an unknown level or L too short for mixed levels
    """
    if level not in LEVELS:
        raise ValidationError(f"level must be in 1..5, got {level}")
    if level in (4, 2) and length < 2:
        raise ValidationError(f"level {level} needs at least 2 steps, got L={length}")
    return {
        5: (length, 0, 0),
        4: (length - 2, 1, 1),
        3: (0, length, 0),
        2: (1, 1, length - 2),
        1: (0, 0, length),
    }[level]


def _as_vector(values: Any) -> np.ndarray:
    """Converte para vetor float64 unidimensional."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError("embedding must be a vector", arr.shape)
    return arr


@dataclass
class ExperiencePair:
    """One (image, text) experience at one input step."""

    image_embedding: np.ndarray
    text_embedding: np.ndarray
    relevance: Relevance = Relevance.RANK1

    def __post_init__(self):
        self.image_embedding = _as_vector(self.image_embedding)
        self.text_embedding = _as_vector(self.text_embedding)
        self.relevance = Relevance(self.relevance)
        if self.image_embedding.shape != self.text_embedding.shape:
            raise DimensionError(
                "image and text embeddings differ in dimension",
                self.image_embedding.shape,
                self.text_embedding.shape,
            )

    @property
    def dim(self) -> int:
        return self.image_embedding.shape[0]

    def is_unit_norm(self, tolerance: float = UNIT_NORM_TOLERANCE) -> bool:
        return all(
            abs(np.linalg.norm(v) - 1.0) <= tolerance
            for v in (self.image_embedding, self.text_embedding)
        )

    def __eq__(self, other):
        if not isinstance(other, ExperiencePair):
            return False
        return (
            self.relevance == other.relevance
            and np.array_equal(self.image_embedding, other.image_embedding)
            and np.array_equal(self.text_embedding, other.text_embedding)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "image": self.image_embedding.tolist(),
            "text": self.text_embedding.tolist(),
            "rank": self.relevance.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperiencePair":
        return cls(
            image_embedding=data["image"],
            text_embedding=data["text"],
            relevance=Relevance(data.get("rank", Relevance.RANK1.value)),
        )


@dataclass
class ExperienceSequence:
    """A topic and its ordered experience pairs: the model input."""

    topic_embedding: np.ndarray
    pairs: List[ExperiencePair] = field(default_factory=list)

    def __post_init__(self):
        self.topic_embedding = _as_vector(self.topic_embedding)
        for pair in self.pairs:
            if pair.dim != self.topic_embedding.shape[0]:
                raise DimensionError(
                    "experience pair and topic differ in dimension",
                    pair.image_embedding.shape,
                    self.topic_embedding.shape,
                )

    @property
    def length(self) -> int:
        return len(self.pairs)

    @property
    def dim(self) -> int:
        return self.topic_embedding.shape[0]

    def image_matrix(self) -> np.ndarray:
        """(L, d_e) stack of image embeddings."""
        return np.stack([p.image_embedding for p in self.pairs])

    def text_matrix(self) -> np.ndarray:
        """(L, d_e) stack of text embeddings."""
        return np.stack([p.text_embedding for p in self.pairs])

    def permuted(self, order: Sequence[int]) -> "ExperienceSequence":
        """New sequence whose step j is this sequence's step order[j]."""
        if sorted(order) != list(range(self.length)):
            raise ValidationError(f"not a permutation of {self.length} steps: {list(order)}")
        return ExperienceSequence(self.topic_embedding.copy(), [self.pairs[i] for i in order])

    def rotated(self) -> "ExperienceSequence":
        """Rotate by one step; a derangement whenever L >= 2."""
        return self.permuted([(j + 1) % self.length for j in range(self.length)])

    def __eq__(self, other):
        if not isinstance(other, ExperienceSequence):
            return False
        same_topic = np.array_equal(self.topic_embedding, other.topic_embedding)
        return same_topic and self.pairs == other.pairs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "topic": self.topic_embedding.tolist(),
            "pairs": [p.to_dict() for p in self.pairs],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperienceSequence":
        return cls(
            topic_embedding=data["topic"],
            pairs=[ExperiencePair.from_dict(p) for p in data["pairs"]],
        )


@dataclass
class EPassage:
    """An experience sequence, its L-sentence target and its curriculum level."""

    input: ExperienceSequence
    target: List[List[int]]
    level: int = 5
    sample_id: str = ""
    topic_id: Optional[int] = None
    concept_ids: Optional[List[int]] = None

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValidationError(f"level must be in 1..5, got {self.level}")
        self.target = [[int(tok) for tok in sentence] for sentence in self.target]

    @property
    def key(self) -> tuple:
        return (self.sample_id, self.level)

    def validate(self, length: int, vocab_size: int) -> None:
        """
        Check the record against the corpus shape.

        Raises:
            ValidationError: On wrong L, empty sentences or out-of-range token ids
        """
        if self.input.length != length:
            raise ValidationError(
                f"{self.sample_id}: {self.input.length} experience steps, expected {length}"
            )
        if len(self.target) != length:
            raise ValidationError(
                f"{self.sample_id}: {len(self.target)} target sentences, expected {length}"
            )
        for k, sentence in enumerate(self.target):
            if not sentence:
                raise ValidationError(f"{self.sample_id}: target sentence {k} is empty")
            bad = [tok for tok in sentence if tok < NUM_SPECIAL_TOKENS or tok >= vocab_size]
            if bad:
                raise ValidationError(f"{self.sample_id}: sentence {k} has invalid token ids {bad}")

    def relevance_counts(self) -> tuple:
        """(Rank1, Rank3, RandomNegative) counts of the input pairs."""
        ranks = [p.relevance for p in self.input.pairs]
        return (
            ranks.count(Relevance.RANK1),
            ranks.count(Relevance.RANK3),
            ranks.count(Relevance.NEGATIVE),
        )

    def __eq__(self, other):
        if not isinstance(other, EPassage):
            return False
        return (
            self.input == other.input
            and self.target == other.target
            and self.level == other.level
            and self.sample_id == other.sample_id
            and self.topic_id == other.topic_id
            and self.concept_ids == other.concept_ids
        )

    def to_dict(self) -> Dict[str, Any]:
        """Converte para dicionário."""
        data = {
            "sample_id": self.sample_id,
            "level": self.level,
            **self.input.to_dict(),
            "target": self.target,
        }
        if self.topic_id is not None:
            data["topic_id"] = self.topic_id
        if self.concept_ids is not None:
            data["concept_ids"] = list(self.concept_ids)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EPassage":
        return cls(
            input=ExperienceSequence.from_dict(data),
            target=data["target"],
            level=int(data["level"]),
            sample_id=str(data["sample_id"]),
            topic_id=data.get("topic_id"),
            concept_ids=data.get("concept_ids"),
        )


@dataclass
class PassageTokens:
    """
    A generated (or reference) passage: L sentences of content token ids.

    Sentences exclude the separator; `stream()` renders the flat decoder
    sequence y_1 SEP y_2 SEP ... y_L SEP.
    """

    sentences: List[List[int]] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def length(self) -> int:
        return len(self.sentences)

    def stream(self) -> List[int]:
        tokens: List[int] = []
        for sentence in self.sentences:
            tokens.extend(sentence)
            tokens.append(SEP_ID)
        return tokens

    def flat(self) -> List[int]:
        """All content tokens in order, without separators."""
        return [tok for sentence in self.sentences for tok in sentence]

    @classmethod
    def from_stream(cls, tokens: Sequence[int], seed: Optional[int] = None) -> "PassageTokens":
        sentences: List[List[int]] = [[]]
        for tok in tokens:
            if tok == SEP_ID:
                sentences.append([])
            else:
                sentences[-1].append(int(tok))
        if not sentences[-1]:
            sentences.pop()
        return cls(sentences=sentences, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return {"sentences": self.sentences, "seed": self.seed}


@dataclass
class SynthConfig:
    """Shape and randomness of a synthetic e-passage corpus."""

    L: int = 5
    vocab_size: int = 512
    d_e: int = 64
    n_passages: int = 32
    concepts_per_step: int = 3
    noise_std: float = 0.02
    seed: int = 0
    n_concepts: int = 64
    n_topics: int = 16
    sentence_len: int = 8
    test_size: int = 8

    @property
    def n_fillers(self) -> int:
        return self.vocab_size - NUM_SPECIAL_TOKENS - self.n_topics - self.n_concepts

    def topic_token(self, topic_id: int) -> int:
        return NUM_SPECIAL_TOKENS + topic_id

    def concept_token(self, concept_id: int) -> int:
        return NUM_SPECIAL_TOKENS + self.n_topics + concept_id

    def filler_token(self, filler_id: int) -> int:
        return NUM_SPECIAL_TOKENS + self.n_topics + self.n_concepts + filler_id

    def validate(self) -> None:
        """
        Raises:
            ValidationError: On non-positive counts, negative noise, an even concept
                window, or a vocabulary too small for the markers
        """
        for name in ("L", "vocab_size", "d_e", "n_passages", "concepts_per_step",
                     "n_concepts", "n_topics", "sentence_len"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.test_size < 0:
            raise ValidationError(f"test_size must be non-negative, got {self.test_size}")
        if self.noise_std < 0:
            raise ValidationError(f"noise_std must be non-negative, got {self.noise_std}")
        if self.concepts_per_step % 2 == 0:
            raise ValidationError(f"concepts_per_step must be odd, got {self.concepts_per_step}")
        if self.sentence_len < 1 + self.concepts_per_step:
            raise ValidationError(
                f"sentence_len {self.sentence_len} cannot hold a topic marker and "
                f"{self.concepts_per_step} concept markers"
            )
        if self.n_concepts < self.L:
            raise ValidationError(f"n_concepts ({self.n_concepts}) must be at least L ({self.L})")
        if self.n_fillers < 1:
            raise ValidationError(
                f"vocab_size {self.vocab_size} too small: needs {NUM_SPECIAL_TOKENS} reserved + "
                f"{self.n_topics} topic + {self.n_concepts} concept markers + at least one filler"
            )
        if self.d_e < 2:
            raise ValidationError(f"d_e must be at least 2, got {self.d_e}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "L": self.L,
            "vocab_size": self.vocab_size,
            "d_e": self.d_e,
            "n_passages": self.n_passages,
            "concepts_per_step": self.concepts_per_step,
            "noise_std": self.noise_std,
            "seed": self.seed,
            "n_concepts": self.n_concepts,
            "n_topics": self.n_topics,
            "sentence_len": self.sentence_len,
            "test_size": self.test_size,
        }
