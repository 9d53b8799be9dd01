"""Binary matrix (``UDAM``) and label (``UDAL``) files, plus CSV ingestion.

``UDAM``: magic, version u32 = 1, rows u64, cols u64, row-major float64.
``UDAL``: magic, version u32 = 1, length u64, int64 labels.
All integers and payloads are little-endian.
"""

import csv
import struct
from pathlib import Path

import numpy as np

from uda_bench.utils.exceptions import FormatError

MATRIX_MAGIC = b"UDAM"
LABEL_MAGIC = b"UDAL"
VERSION = 1


def _check_header(data: bytes, magic: bytes) -> None:
    if data[:4] != magic:
        raise FormatError(
            f"bad magic: expected {magic.decode()}, found {data[:4]!r}", offset=0
        )
    if len(data) < 8:
        raise FormatError("truncated version field", offset=4)
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise FormatError(
            f"unsupported {magic.decode()} version {version}", offset=4
        )


def _payload(data: bytes, offset: int, count: int, dtype: str) -> np.ndarray:
    size = count * 8
    if len(data) < offset + size:
        raise FormatError(
            f"truncated payload: expected {size} bytes, found {len(data) - offset}",
            offset=len(data),
        )
    if len(data) > offset + size:
        raise FormatError("trailing bytes after payload", offset=offset + size)
    if count == 0:
        return np.empty(0, dtype=dtype)
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset)


def encode_matrix(X: np.ndarray) -> bytes:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise FormatError(f"matrices are 2-D, got shape {X.shape}")
    rows, cols = X.shape
    header = MATRIX_MAGIC + struct.pack("<IQQ", VERSION, rows, cols)
    return header + np.ascontiguousarray(X, dtype="<f8").tobytes()


def decode_matrix(data: bytes) -> np.ndarray:
    _check_header(data, MATRIX_MAGIC)
    if len(data) < 24:
        raise FormatError("truncated shape fields", offset=8)
    rows, cols = struct.unpack_from("<QQ", data, 8)
    values = _payload(data, 24, rows * cols, "<f8")
    return values.astype(np.float64).reshape(rows, cols)


def encode_labels(y: np.ndarray) -> bytes:
    y = np.asarray(y).reshape(-1)
    header = LABEL_MAGIC + struct.pack("<IQ", VERSION, len(y))
    return header + np.ascontiguousarray(y, dtype="<i8").tobytes()


def decode_labels(data: bytes) -> np.ndarray:
    _check_header(data, LABEL_MAGIC)
    if len(data) < 16:
        raise FormatError("truncated length field", offset=8)
    (length,) = struct.unpack_from("<Q", data, 8)
    return _payload(data, 16, length, "<i8").astype(np.int64)


def _read_csv(path: Path) -> list[list[float]]:
    rows: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as handle:
        for number, fields in enumerate(csv.reader(handle), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            try:
                rows.append([float(f) for f in fields])
            except ValueError as e:
                if number == 1 and not rows:
                    continue  # header row
                raise FormatError(f"{path}: non-numeric field", line=number) from e
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(
                    f"{path}: expected {len(rows[0])} columns, found {len(rows[-1])}",
                    line=number,
                )
    return rows


def save_matrix(path: Path, X: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_matrix(X))


def load_matrix(path: Path) -> np.ndarray:
    """Load a ``UDAM`` file, or a CSV file when the suffix is ``.csv``."""
    if path.suffix.lower() == ".csv":
        rows = _read_csv(path)
        return np.array(rows, dtype=np.float64).reshape(len(rows), -1 if rows else 0)
    return decode_matrix(path.read_bytes())


def save_labels(path: Path, y: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_labels(y))


def load_labels(path: Path) -> np.ndarray:
    """Load a ``UDAL`` file, or a one-label-per-row CSV file."""
    if path.suffix.lower() != ".csv":
        return decode_labels(path.read_bytes())
    values = [v for row in _read_csv(path) for v in row]
    labels = np.array(values, dtype=np.float64)
    if not np.all(labels == np.round(labels)):
        raise FormatError(f"{path}: labels must be integers")
    return labels.astype(np.int64)


def save_csv(path: Path, values: np.ndarray) -> None:
    """Write a matrix (or a label vector, one per row) without a header."""
    rows = np.atleast_2d(values.T).T if values.ndim == 1 else values
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for row in rows:
            writer.writerow([repr(v.item()) for v in row])
