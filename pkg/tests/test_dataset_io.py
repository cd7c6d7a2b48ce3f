"""
Unit tests for dataset files

Tests:
- DatasetParser: record parsing and line-numbered errors
- JsonExporter: datasets, generated passages, reports
- DataValidator: records checked against a model configuration
"""

import json
from dataclasses import replace

import numpy as np
import pytest

from src.exporter.json_exporter import JsonExporter, append_jsonl, write_json
from src.parser.dataset_parser import DatasetParser, load_dataset
from src.schema.models import ExperiencePair, PassageTokens, Relevance
from src.synth.generator import generate_corpus
from src.utils.errors import ParseException, ValidationError
from src.validator.data_validator import DataValidator


# ============================================================================
# FIXTURES
# ============================================================================


@pytest.fixture
def exporter():
    return JsonExporter()


@pytest.fixture
def dataset_file(tmp_path, exporter, tiny_curriculum):
    return exporter.save_dataset(tmp_path / "train.jsonl", tiny_curriculum)


@pytest.fixture
def bare_line():
    """An experience sequence without target, level or id."""
    return json.dumps(
        {
            "topic": [1.0, 0.0],
            "pairs": [
                {"image": [0.0, 1.0], "text": [1.0, 0.0]},
                {"image": [1.0, 0.0], "text": [0.0, 1.0]},
            ],
        }
    )


# ============================================================================
# TEST: DatasetParser
# ============================================================================


class TestDatasetParser:
    """Test the JSON-lines reader"""

    def test_load_written_dataset(self, dataset_file, tiny_curriculum):
        assert load_dataset(dataset_file) == tiny_curriculum

    def test_blank_lines_ignored(self, dataset_file, tiny_curriculum):
        content = dataset_file.read_text().replace("\n", "\n\n")
        assert len(DatasetParser().parse(content)) == len(tiny_curriculum)

    def test_truncated_file_reports_line(self, dataset_file):
        lines = dataset_file.read_text().splitlines()
        truncated = "\n".join(lines[:6] + [lines[6][: len(lines[6]) // 2]])
        dataset_file.write_text(truncated)

        with pytest.raises(ParseException) as excinfo:
            load_dataset(dataset_file)

        assert excinfo.value.line_number == 7
        assert "line 7" in str(excinfo.value)

    def test_non_object_line(self):
        with pytest.raises(ParseException) as excinfo:
            DatasetParser().parse("[1, 2, 3]\n")
        assert excinfo.value.line_number == 1

    def test_missing_target(self, bare_line):
        with pytest.raises(ParseException, match="missing field"):
            DatasetParser().parse(bare_line)

    def test_bare_sequences_allowed_for_generation(self, bare_line):
        records = DatasetParser(require_targets=False).parse(bare_line + "\n" + bare_line)

        assert [r.sample_id for r in records] == ["line-00001", "line-00002"]
        assert records[0].target == []
        assert records[0].level == 5
        assert records[0].input.pairs[0].relevance is Relevance.RANK1

    def test_dimension_mismatch_is_a_parse_error(self):
        line = json.dumps({"topic": [1.0, 0.0], "pairs": [{"image": [1.0], "text": [1.0, 0.0]}]})
        with pytest.raises(ParseException) as excinfo:
            DatasetParser(require_targets=False).parse(line)
        assert excinfo.value.line_number == 1

    def test_unknown_rank(self):
        line = json.dumps(
            {"topic": [1.0], "pairs": [{"image": [1.0], "text": [1.0], "rank": "Rank2"}]}
        )
        with pytest.raises(ParseException):
            DatasetParser(require_targets=False).parse(line)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseException, match="cannot read"):
            load_dataset(tmp_path / "absent.jsonl")


# ============================================================================
# TEST: JsonExporter
# ============================================================================


class TestJsonExporter:
    """Test the writers"""

    def test_same_seed_same_bytes(self, tmp_path, exporter, tiny_synth_config):
        first = exporter.save_dataset(tmp_path / "a.jsonl", generate_corpus(tiny_synth_config).train)
        second = exporter.save_dataset(tmp_path / "b.jsonl", generate_corpus(tiny_synth_config).train)
        assert first.read_bytes() == second.read_bytes()

    def test_different_seed_different_bytes(self, tmp_path, exporter, tiny_synth_config):
        first = exporter.save_dataset(tmp_path / "a.jsonl", generate_corpus(tiny_synth_config).train)
        other = replace(tiny_synth_config, seed=tiny_synth_config.seed + 1)
        second = exporter.save_dataset(tmp_path / "b.jsonl", generate_corpus(other).train)
        assert first.read_bytes() != second.read_bytes()

    def test_dataset_record_fields(self, dataset_file):
        record = json.loads(dataset_file.read_text().splitlines()[0])
        assert {"sample_id", "level", "topic", "pairs", "target", "topic_id", "concept_ids"} <= set(record)
        assert set(record["pairs"][0]) == {"image", "text", "rank"}

    def test_save_passages(self, tmp_path, exporter):
        generations = [
            {"sample_id": "p-00000", "index": 0, "passage": PassageTokens([[5, 6], [7]], seed=11)},
            {"sample_id": "p-00000", "index": 1, "passage": PassageTokens([[8], [9, 9]], seed=12)},
        ]

        path = exporter.save_passages(tmp_path / "out" / "gen.jsonl", generations)

        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert lines[0] == {"sample_id": "p-00000", "index": 0, "sentences": [[5, 6], [7]], "seed": 11}
        assert lines[1]["index"] == 1

    def test_write_json_sorted(self, tmp_path):
        path = write_json(tmp_path / "r.json", {"b": 1, "a": 2})
        assert path.read_text() == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_append_jsonl(self, tmp_path):
        path = tmp_path / "trace.jsonl"
        append_jsonl(path, {"step": 1})
        append_jsonl(path, {"step": 2})
        assert [json.loads(line)["step"] for line in path.read_text().splitlines()] == [1, 2]


# ============================================================================
# TEST: DataValidator
# ============================================================================


class TestDataValidator:
    """Test dataset checks against the model configuration"""

    def test_curriculum_is_valid(self, tiny_model_config, tiny_curriculum):
        assert DataValidator(tiny_model_config).validate(tiny_curriculum) == []

    def test_empty_dataset(self, tiny_model_config):
        assert DataValidator(tiny_model_config).validate([]) == ["Dataset is empty"]

    def test_wrong_embedding_dim(self, tiny_model_config, tiny_curriculum):
        config = replace(tiny_model_config, d_e=16)
        errors = DataValidator(config).validate(tiny_curriculum[:1])
        assert any("embedding dim" in e for e in errors)

    def test_vocabulary_mismatch(self, tiny_model_config, tiny_curriculum):
        config = replace(tiny_model_config, vocab_size=10)
        errors = DataValidator(config).validate(tiny_curriculum[:1])
        assert any("invalid token ids" in e for e in errors)

    def test_duplicate_records(self, tiny_model_config, tiny_curriculum):
        errors = DataValidator(tiny_model_config).validate([tiny_curriculum[0], tiny_curriculum[0]])
        assert errors == [f"{tiny_curriculum[0].key}: duplicate record"]

    def test_relevance_mix_must_match_level(self, tiny_model_config, tiny_corpus):
        passage = tiny_corpus.train[0]
        wrong = replace(passage, level=1)
        errors = DataValidator(tiny_model_config).validate([wrong])
        assert any("relevance mix" in e for e in errors)

    def test_non_unit_embeddings(self, tiny_model_config, tiny_corpus):
        passage = tiny_corpus.train[0]
        first = passage.input.pairs[0]
        passage.input.pairs[0] = ExperiencePair(
            first.image_embedding * 2.0, first.text_embedding, first.relevance
        )
        errors = DataValidator(tiny_model_config).validate([passage])
        assert any("unit-norm" in e for e in errors)

    def test_target_too_long_for_positions(self, tiny_model_config, tiny_corpus):
        config = replace(tiny_model_config, n_positions=12)
        errors = DataValidator(config).validate(tiny_corpus.train[:1])
        assert any("positions" in e for e in errors)

    def test_generation_length_must_fit(self, tiny_model_config, tiny_corpus):
        assert DataValidator(tiny_model_config, max_len=9).validate(tiny_corpus.test) == []
        errors = DataValidator(tiny_model_config, max_len=10).validate(tiny_corpus.test)
        assert errors and "max_len=10" in errors[0]

    def test_bare_inputs_need_no_target(self, tiny_model_config, tiny_corpus):
        bare = [replace(p, target=[]) for p in tiny_corpus.test]
        assert DataValidator(tiny_model_config).validate(bare, require_targets=False) == []
        assert DataValidator(tiny_model_config).validate(bare, require_targets=True) != []

    def test_ensure_valid_raises(self, tiny_model_config):
        with pytest.raises(ValidationError, match="1 dataset problem"):
            DataValidator(tiny_model_config).ensure_valid([])

    def test_arrays_survive_validation(self, tiny_model_config, tiny_curriculum):
        before = tiny_curriculum[0].input.image_matrix().copy()
        DataValidator(tiny_model_config).ensure_valid(tiny_curriculum)
        np.testing.assert_array_equal(tiny_curriculum[0].input.image_matrix(), before)
