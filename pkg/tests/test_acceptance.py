"""
Acceptance runs at desk scale (L=5, vocab 512, d=64, 32 passages)

Slow: excluded by the default `-m 'not slow'`; run with `pytest -m slow`.
"""

import pytest

from src.cli.run_config import RunConfig
from src.decoder.transformer import perplexity
from src.metrics.evaluate import evaluate
from src.model.mmtg import MMTGModel
from src.synth.generator import generate_corpus
from src.training.trainer import train

pytestmark = pytest.mark.slow

OVERFIT_PERPLEXITY = 1.3


# ============================================================================
# FIXTURES
# ============================================================================


@pytest.fixture(scope="module")
def desk_config():
    return RunConfig(seed=0, epochs=250, max_steps=2000, lr=2e-3)


@pytest.fixture(scope="module")
def desk_corpus(desk_config):
    return generate_corpus(desk_config.to_synth_config())


def fit(config: RunConfig, corpus) -> MMTGModel:
    model = MMTGModel.initialize(config.to_model_config())
    train(corpus.curriculum(), model, config.to_train_config())
    return model


@pytest.fixture(scope="module")
def full_model(desk_config, desk_corpus):
    return fit(desk_config, desk_corpus)


# ============================================================================
# TEST: Acceptance
# ============================================================================


class TestAcceptance:
    """Test the desk-scale training and order-sensitivity runs"""

    def test_overfits_training_passages(self, full_model, desk_corpus):
        scores = full_model.score(desk_corpus.train)
        assert perplexity(scores.log_probs, scores.batch) < OVERFIT_PERPLEXITY

    def test_training_is_deterministic(self, desk_config, desk_corpus):
        short = desk_config.updated(max_steps=20)
        first, second = fit(short, desk_corpus), fit(short, desk_corpus)
        assert first.score(desk_corpus.train[:4]).f.data.tolist() == (
            second.score(desk_corpus.train[:4]).f.data.tolist()
        )

    def test_span_attention_makes_output_order_sensitive(self, desk_config, desk_corpus, full_model):
        gen_cfg = desk_config.to_generation_config()
        ablated = fit(desk_config.variant("no_span_attention"), desk_corpus)

        full = evaluate(full_model, desk_corpus.test, gen_cfg, paired_seeds=True)
        uniform = evaluate(ablated, desk_corpus.test, gen_cfg, paired_seeds=True)

        assert full.nnr2 > 0.05
        assert full.nnr2 > uniform.nnr2
