"""Teacher-forcing layout of target passages for the decoder."""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from src.schema.models import BOS_ID, PAD_ID, SEP_ID
from src.utils.errors import ValidationError


@dataclass
class TokenBatch:
    """
    Padded decoder batch.

    The target stream of a passage is y_1 SEP y_2 SEP ... y_L SEP; the input is
    BOS followed by the stream without its last token. `segments[b, p]` is the
    sentence index of target position p, which selects the experience
    embedding added at input position p.
    """

    inputs: np.ndarray  # (B, T) int
    targets: np.ndarray  # (B, T) int
    segments: np.ndarray  # (B, T) int
    mask: np.ndarray  # (B, T) float, 1 on real positions

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]

    @property
    def length(self) -> int:
        return self.inputs.shape[1]

    @property
    def token_count(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_targets(cls, passages: Sequence[Sequence[Sequence[int]]]) -> "TokenBatch":
        """
        Build a batch from passages given as lists of sentences (without separators).

        Raises:
            ValidationError: If the batch or any passage is empty
        """
        if not passages:
            raise ValidationError("cannot build a token batch from zero passages")
        streams: List[List[int]] = []
        segment_rows: List[List[int]] = []
        for passage in passages:
            if not passage:
                raise ValidationError("target passage has no sentences")
            stream, segments = [], []
            for k, sentence in enumerate(passage):
                stream.extend(int(tok) for tok in sentence)
                stream.append(SEP_ID)
                segments.extend([k] * (len(sentence) + 1))
            streams.append(stream)
            segment_rows.append(segments)

        width = max(len(s) for s in streams)
        batch = len(streams)
        inputs = np.full((batch, width), PAD_ID, dtype=np.int64)
        targets = np.full((batch, width), PAD_ID, dtype=np.int64)
        segments = np.zeros((batch, width), dtype=np.int64)
        mask = np.zeros((batch, width), dtype=np.float64)
        for b, (stream, seg) in enumerate(zip(streams, segment_rows)):
            n = len(stream)
            targets[b, :n] = stream
            inputs[b, 0] = BOS_ID
            inputs[b, 1:n] = stream[: n - 1]
            segments[b, :n] = seg
            # padding keeps the last sentence's embedding
            segments[b, n:] = seg[-1]
            mask[b, :n] = 1.0
        return cls(inputs=inputs, targets=targets, segments=segments, mask=mask)
