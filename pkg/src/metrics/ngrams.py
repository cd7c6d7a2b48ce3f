"""BLEU-n, Distinct-n and the new-n-gram rate between two text collections."""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence, Set, Tuple

from nltk.translate.bleu_score import brevity_penalty, closest_ref_length, modified_precision
from nltk.util import ngrams

from src.utils.errors import ValidationError

Tokens = Sequence[Hashable]
Ngram = Tuple[Hashable, ...]


@dataclass
class NgramSet:
    """Multiset of the n-grams of a collection of token sequences; `unique` is its support."""

    n: int
    counts: Counter = field(default_factory=Counter)

    @classmethod
    def from_texts(cls, texts: Iterable[Tokens], n: int) -> "NgramSet":
        if n < 1:
            raise ValidationError(f"n must be at least 1, got {n}")
        counts: Counter = Counter()
        for tokens in texts:
            counts.update(ngrams(list(tokens), n))
        return cls(n=n, counts=counts)

    @property
    def unique(self) -> Set[Ngram]:
        return set(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def bleu_n(candidate: Tokens, references: Sequence[Tokens], n: int) -> float:
    """
    Unsmoothed sentence BLEU with uniform weights over orders 1..n.

    Any zero modified precision, or an empty candidate, scores 0.
    """
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    candidate = list(candidate)
    references = [list(ref) for ref in references]
    if not candidate or not references:
        return 0.0

    log_total = 0.0
    for order in range(1, n + 1):
        precision = modified_precision(references, candidate, order)
        if precision.numerator == 0:
            return 0.0
        log_total += math.log(precision.numerator / precision.denominator)

    hyp_len = len(candidate)
    bp = brevity_penalty(closest_ref_length(references, hyp_len), hyp_len)
    return float(bp * math.exp(log_total / n))


def distinct_n(texts: Iterable[Tokens], n: int) -> float:
    """
    Unique n-grams over total n-grams of the whole collection.

    Raises:
        ValidationError: If the collection has no n-gram of order n
    """
    grams = NgramSet.from_texts(texts, n)
    if grams.total == 0:
        raise ValidationError(f"no {n}-grams in the collection")
    return len(grams.unique) / grams.total


def nnr(x_texts: Iterable[Tokens], y_texts: Iterable[Tokens], n: int) -> float:
    """
    |uniq(Y) \\ uniq(X)| / |uniq(X) ∪ uniq(Y)|: the share of n-grams only Y produces.

    Raises:
        ValidationError: If neither collection has an n-gram of order n
    """
    x = NgramSet.from_texts(x_texts, n).unique
    y = NgramSet.from_texts(y_texts, n).unique
    union = x | y
    if not union:
        raise ValidationError(f"no {n}-grams in either collection")
    return len(y - x) / len(union)
