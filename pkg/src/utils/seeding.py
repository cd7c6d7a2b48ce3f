"""Seed derivation: every random stream descends from one root seed."""
import zlib
from typing import Union

import numpy as np

SeedKey = Union[int, str]


def _key_to_int(key: SeedKey) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"Seed keys must be non-negative, got {key}")
    return int(key)


def derive_seed_sequence(root_seed: int, *keys: SeedKey) -> np.random.SeedSequence:
    """Build the seed sequence for the stream named by ``keys`` under ``root_seed``."""
    return np.random.SeedSequence(int(root_seed), spawn_key=tuple(_key_to_int(k) for k in keys))


def derive_rng(root_seed: int, *keys: SeedKey) -> np.random.Generator:
    """
    Derive an independent generator for a named sub-stream.

    Args:
        root_seed: The run's single root seed
        *keys: Stream labels, e.g. ("passage", 3) or ("eval", "s-0004", 7)

    Returns:
        np.random.Generator: Deterministic for identical (root_seed, keys)
    """
    return np.random.default_rng(derive_seed_sequence(root_seed, *keys))


def derive_seed(root_seed: int, *keys: SeedKey) -> int:
    """Derive a 32-bit integer seed, for artifacts that record seeds."""
    return int(derive_seed_sequence(root_seed, *keys).generate_state(1)[0])
