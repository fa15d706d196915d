"""On-disk formats: the binary feature matrix container and the JSON-lines
dataset index.

Feature container layout (little-endian throughout):

    bytes 0..3    magic "VSTG"
    bytes 4..7    version u32 (1 = float32 payload, 2 = float64 payload)
    bytes 8..11   rows u32
    bytes 12..15  cols u32
    bytes 16..    rows*cols floats, row-major

Version 1 is the interchange format for features and semantic matrices.
Version 2 carries float64 payloads so checkpoints round-trip model
parameters bit-exactly in double precision.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"VSTG"
_HEADER = struct.Struct("<4sIII")
_VERSION_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class FormatError(ValueError):
    """Malformed feature file; the message names the failing byte offset."""


def write_feature_file(path, array: np.ndarray) -> None:
    """Write a 2D array; float64 input selects the version-2 container."""
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise FormatError(f"feature files hold 2D matrices, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise FormatError("refusing to write non-finite values")
    if arr.dtype == np.float64:
        version = 2
    else:
        version = 1
        arr = arr.astype(np.float32, copy=False)
    payload = np.ascontiguousarray(arr, dtype=_VERSION_DTYPES[version])
    header = _HEADER.pack(MAGIC, version, arr.shape[0], arr.shape[1])
    Path(path).write_bytes(header + payload.tobytes())


def read_feature_file(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(
            f"{path}: truncated header, file ends at offset {len(raw)} "
            f"(need {_HEADER.size})"
        )
    magic, version, rows, cols = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    dtype = _VERSION_DTYPES.get(version)
    if dtype is None:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    expected = _HEADER.size + rows * cols * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload ends at offset {len(raw)}, expected {expected}"
        )
    data = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    return data.reshape(rows, cols).copy()


# -- JSON-lines sample index --------------------------------------------------


def write_index(path, records: list[dict]) -> None:
    """One JSON object per line; key order fixed for reproducible bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_index(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{line_no}: invalid JSON ({exc})") from exc
    return records


def write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
