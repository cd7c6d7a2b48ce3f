"""
Versioned tensor dump.

Layout: magic, format version (uint32), header length (uint64), a JSON header
listing every tensor's name, shape and offset plus free-form metadata, then the
raw little-endian float64 payload. Writing is deterministic: identical tensors
and metadata give identical bytes.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"MMTGCKPT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_DTYPE = np.dtype("<f8")


def save_checkpoint(
    path: Union[str, Path], tensors: Mapping[str, np.ndarray], meta: Dict[str, Any]
) -> Path:
    """
    Write named float64 arrays and metadata.

    Args:
        path: Output file; parent directories are created
        tensors: Ordered name → array mapping
        meta: JSON-serialisable metadata (model config, flags, seed)

    Returns:
        Path: The file written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    offset = 0
    payload = []
    for name, array in tensors.items():
        data = np.ascontiguousarray(array, dtype=_DTYPE)
        entries.append(
            {"name": name, "shape": list(data.shape), "offset": offset, "count": int(data.size)},
        )
        payload.append(data.tobytes())
        offset += data.size

    header = json.dumps({"tensors": entries, "meta": meta}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)))
        f.write(header)
        for chunk in payload:
            f.write(chunk)

    logger.info(f"Saved checkpoint with {len(entries)} tensors to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a checkpoint written by `save_checkpoint`.

    Returns:
        (name → array, metadata)

    Raises:
        CheckpointError: If the file is missing, foreign, of another version or truncated
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    if len(raw) < _PREFIX.size:
        raise CheckpointError(f"{path} is too short to be a checkpoint")
    magic, version, header_len = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has format version {version}, expected {FORMAT_VERSION}")

    start = _PREFIX.size
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path} has a corrupt header: {e}") from e

    body = raw[start + header_len :]
    if len(body) % _DTYPE.itemsize:
        raise CheckpointError(f"{path} payload is not a whole number of float64 values")
    payload = np.frombuffer(body, dtype=_DTYPE)
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        begin, count = entry["offset"], entry["count"]
        if begin + count > payload.size:
            raise CheckpointError(f"{path} is truncated at tensor '{entry['name']}'")
        data = payload[begin : begin + count].reshape(entry["shape"])
        tensors[entry["name"]] = data.astype(np.float64)
    return tensors, header.get("meta", {})
