"""Shared tiny-scale fixtures."""
import numpy as np
import pytest

from src.model.config import ModelConfig, ModelFlags
from src.model.mmtg import MMTGModel
from src.schema.models import SynthConfig
from src.synth.generator import generate_corpus


# ============================================================================
# FIXTURES
# ============================================================================


@pytest.fixture
def rng():
    """Deterministic generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_synth_config():
    """Corpus small enough for per-test generation: L=3, vocab 40, d_e 8."""
    return SynthConfig(
        L=3,
        vocab_size=40,
        d_e=8,
        n_passages=4,
        concepts_per_step=3,
        noise_std=0.02,
        seed=7,
        n_concepts=12,
        n_topics=3,
        sentence_len=5,
        test_size=2,
    )


@pytest.fixture
def tiny_corpus(tiny_synth_config):
    return generate_corpus(tiny_synth_config)


@pytest.fixture
def tiny_curriculum(tiny_corpus):
    """All five levels of every training passage."""
    return tiny_corpus.curriculum()


def make_model_config(**flags) -> ModelConfig:
    return ModelConfig(
        L=3,
        d_e=8,
        d_h=8,
        d_m=8,
        vocab_size=40,
        n_layers=1,
        n_heads=2,
        n_positions=32,
        seed=3,
        flags=ModelFlags(**flags),
    )


@pytest.fixture
def tiny_model_config():
    return make_model_config()


@pytest.fixture
def tiny_model(tiny_model_config):
    return MMTGModel.initialize(tiny_model_config)


@pytest.fixture
def make_model():
    """Factory: tiny model with the given structural flags."""

    def factory(**flags) -> MMTGModel:
        return MMTGModel.initialize(make_model_config(**flags))

    return factory
