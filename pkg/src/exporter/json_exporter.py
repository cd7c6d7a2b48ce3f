"""JSON / JSON-lines writers for datasets, traces, generations and reports."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

from src.schema.models import EPassage, PassageTokens

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_json(path: PathLike, data: Any) -> Path:
    """Write one JSON document with sorted keys (byte-stable for equal inputs)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> Path:
    """Escreve um registro JSON por linha."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def append_jsonl(path: PathLike, record: Dict[str, Any]) -> None:
    """Append one record; the trace file is never rewritten."""
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")


class JsonExporter:
    """Export corpora, generations and evaluation reports."""

    def save_dataset(self, output_file: PathLike, passages: Sequence[EPassage]) -> Path:
        """One e-passage record per line."""
        path = write_jsonl(output_file, (p.to_dict() for p in passages))
        logger.info(f"Wrote {len(passages)} records to {path}")
        return path

    def save_passages(
        self,
        output_file: PathLike,
        generations: Sequence[Dict[str, Any]],
    ) -> Path:
        """
        Generated passages, one line per (sample_id, sample index).

        Each entry holds `sample_id`, `index`, and `passage` (PassageTokens).
        """
        records: List[Dict[str, Any]] = []
        for entry in generations:
            passage: PassageTokens = entry["passage"]
            records.append(
                {
                    "sample_id": entry["sample_id"],
                    "index": entry["index"],
                    "sentences": passage.sentences,
                    "seed": passage.seed,
                }
            )
        path = write_jsonl(output_file, records)
        logger.info(f"Wrote {len(records)} generated passages to {path}")
        return path

    def save_report(self, output_file: PathLike, report: Dict[str, Any]) -> Path:
        path = write_json(output_file, report)
        logger.info(f"Wrote report to {path}")
        return path
