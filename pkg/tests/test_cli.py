"""
Integration tests for the command line

Tests:
- gen-data → train → generate → evaluate on a tiny configuration
- gradcheck and its self-test
- Exit codes for configuration and runtime errors
"""

import json
import logging

import pytest
from click.testing import CliRunner

from main import cli

TINY_CONFIG = """\
seed: 7
L: 3
vocab_size: 40
d_e: 8
n_passages: 4
n_concepts: 12
n_topics: 3
sentence_len: 5
test_size: 2
d_h: 8
d_m: 8
n_layers: 1
n_heads: 2
n_positions: 32
epochs: 3
batch_size: 4
lr: 0.01
samples_per_input: 2
max_len: 6
"""


# ============================================================================
# FIXTURES
# ============================================================================


@pytest.fixture(autouse=True)
def restore_logging():
    """The CLI installs its own root handler; put pytest's back afterwards."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers = handlers
    root.setLevel(level)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_CONFIG)
    return path


def invoke(runner, *args):
    return runner.invoke(cli, ["--log-level", "WARNING", *map(str, args)])


@pytest.fixture
def data_dir(tmp_path, runner, config_path):
    out = tmp_path / "data"
    result = invoke(runner, "gen-data", "--config", config_path, "--out", out)
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture
def checkpoint(tmp_path, runner, config_path, data_dir):
    path = tmp_path / "model.ckpt"
    result = invoke(
        runner, "train", "--config", config_path, "--data", data_dir / "train.jsonl", "--out", path
    )
    assert result.exit_code == 0, result.output
    return path


# ============================================================================
# TEST: Pipeline
# ============================================================================


class TestPipeline:
    """Test the commands end to end"""

    def test_gen_data(self, data_dir):
        stats = json.loads((data_dir / "stats.json").read_text())

        assert stats["e_passages"] == 4
        assert stats["curriculum_samples"] == 20
        assert len((data_dir / "train.jsonl").read_text().splitlines()) == 20
        assert len((data_dir / "test.jsonl").read_text().splitlines()) == 2

    def test_gen_data_is_reproducible(self, tmp_path, runner, config_path, data_dir):
        again = tmp_path / "again"
        invoke(runner, "gen-data", "--config", config_path, "--out", again)
        assert (again / "train.jsonl").read_bytes() == (data_dir / "train.jsonl").read_bytes()

    def test_train_writes_checkpoint_and_trace(self, checkpoint):
        trace = checkpoint.with_suffix(".trace.jsonl")
        assert checkpoint.is_file()
        assert len(trace.read_text().splitlines()) == 5

    def test_generate(self, tmp_path, runner, config_path, data_dir, checkpoint):
        out = tmp_path / "generated.jsonl"
        result = invoke(
            runner, "generate", "--config", config_path, "--checkpoint", checkpoint,
            "--input", data_dir / "test.jsonl", "--out", out, "--samples", 3,
        )

        assert result.exit_code == 0, result.output
        lines = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(lines) == 2 * 3
        assert all(len(line["sentences"]) == 3 for line in lines)

    def test_generate_too_long_for_positions(self, tmp_path, runner, config_path, data_dir, checkpoint):
        config_path.write_text(TINY_CONFIG.replace("max_len: 6", "max_len: 12"))
        result = invoke(
            runner, "generate", "--config", config_path, "--checkpoint", checkpoint,
            "--input", data_dir / "test.jsonl", "--out", tmp_path / "g.jsonl",
        )
        assert result.exit_code == 2

    def test_evaluate(self, tmp_path, runner, config_path, data_dir, checkpoint):
        report_path = tmp_path / "report.json"
        result = invoke(
            runner, "evaluate", "--config", config_path, "--checkpoint", checkpoint,
            "--test", data_dir / "test.jsonl", "--out", report_path,
        )

        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert {"bleu2", "distinct2", "nnr1", "nnr2", "per_sample"} <= set(report)
        assert "NNR-2" in result.output

    def test_ablate_subset(self, tmp_path, runner, config_path, data_dir):
        out = tmp_path / "ablation"
        result = invoke(
            runner, "ablate", "--config", config_path, "--data", data_dir / "train.jsonl",
            "--test", data_dir / "test.jsonl", "--out", out, "--variant", "full", "--variant", "no_neg",
        )

        assert result.exit_code == 0, result.output
        table = json.loads((out / "ablation.json").read_text())
        assert list(table) == ["full", "no_neg"]
        assert (out / "no_neg.ckpt").is_file()


# ============================================================================
# TEST: gradcheck
# ============================================================================


class TestGradcheckCommand:
    """Test the gradient-check command"""

    def test_self_test(self, runner):
        result = invoke(runner, "gradcheck", "--self-test")
        assert result.exit_code == 0, result.output
        assert "detects" in result.output

    def test_single_seed(self, runner):
        result = invoke(runner, "gradcheck", "--seeds", 1)
        assert result.exit_code == 0, result.output
        assert "FAIL" not in result.output


# ============================================================================
# TEST: Exit codes
# ============================================================================


class TestExitCodes:
    """Test how errors surface"""

    def test_missing_config(self, tmp_path, runner):
        result = invoke(runner, "gen-data", "--config", tmp_path / "absent.yaml", "--out", tmp_path)
        assert result.exit_code == 2
        assert "config file not found" in result.output

    def test_unknown_config_key(self, tmp_path, runner):
        path = tmp_path / "bad.yaml"
        path.write_text("learning_rate: 0.1\n")
        result = invoke(runner, "gen-data", "--config", path, "--out", tmp_path)
        assert result.exit_code == 2

    def test_corrupt_dataset(self, tmp_path, runner, config_path):
        data = tmp_path / "broken.jsonl"
        data.write_text("{not json\n")
        result = invoke(runner, "train", "--config", config_path, "--data", data, "--out", tmp_path / "m.ckpt")
        assert result.exit_code == 1
        assert "ParseException" in result.output
        assert "line 1" in result.output

    def test_foreign_checkpoint(self, tmp_path, runner, config_path, data_dir):
        bogus = tmp_path / "bogus.ckpt"
        bogus.write_bytes(b"not a checkpoint at all")
        result = invoke(
            runner, "evaluate", "--config", config_path, "--checkpoint", bogus,
            "--test", data_dir / "test.jsonl", "--out", tmp_path / "r.json",
        )
        assert result.exit_code == 1
        assert "CheckpointError" in result.output
