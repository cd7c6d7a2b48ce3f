"""Line-delimited e-passage dataset reader."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

from src.schema.models import EPassage
from src.utils.errors import DimensionError, ParseException, ValidationError

logger = logging.getLogger(__name__)


class DatasetParser:
    """
    Parse dataset files: one JSON object per line, blank lines ignored.

    Records carry `sample_id`, `level`, `topic`, `pairs` and `target`. With
    ``require_targets=False`` bare experience sequences (no target) are
    accepted too and get a sample id derived from their line number.
    """

    REQUIRED_FIELDS = ("topic", "pairs")

    def __init__(self, require_targets: bool = True):
        self.require_targets = require_targets

    def parse(self, content: str) -> List[EPassage]:
        """
        Parse dataset content.

        Args:
            content: Whole file content

        Returns:
            List[EPassage]: Records in file order

        Raises:
            ParseException: On the first malformed line, with its 1-based number
        """
        passages = []
        for line_number, line in enumerate(content.splitlines(), start=1):
            if not line.strip():
                continue
            passages.append(self.parse_line(line, line_number))
        return passages

    def parse_line(self, line: str, line_number: int) -> EPassage:
        """Parse uma linha JSON em um EPassage."""
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseException(f"invalid JSON ({e.msg})", line_number) from e
        if not isinstance(data, dict):
            raise ParseException("record is not an object", line_number)

        missing = [key for key in self.REQUIRED_FIELDS if key not in data]
        if self.require_targets:
            missing += [key for key in ("target", "sample_id", "level") if key not in data]
        if missing:
            raise ParseException(f"missing field(s) {missing}", line_number)

        record: Dict[str, Any] = dict(data)
        record.setdefault("target", [])
        record.setdefault("level", 5)
        record.setdefault("sample_id", f"line-{line_number:05d}")
        try:
            return EPassage.from_dict(record)
        except (KeyError, TypeError, ValueError, DimensionError, ValidationError) as e:
            raise ParseException(f"invalid record ({e})", line_number) from e


def load_dataset(path: Union[str, Path], require_targets: bool = True) -> List[EPassage]:
    """
    Raises:
        ParseException: If the file cannot be read or a line is malformed
    """
    path = Path(path)
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseException(f"cannot read {path}: {e}") from e
    passages = DatasetParser(require_targets=require_targets).parse(content)
    logger.info(f"Loaded {len(passages)} records from {path}")
    return passages
