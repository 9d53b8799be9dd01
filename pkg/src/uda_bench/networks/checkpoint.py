"""``UDAW`` model checkpoint files.

Layout: magic ``UDAW``, version u32 = 1, then per parameter: name length
u16, UTF-8 name, rows u64, cols u64 and the row-major float64 payload, all
little-endian. Parameter names are ``<group>/<layer>.<weight|bias>``.
"""

import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from uda_bench.networks.bundle import ModelBundle
from uda_bench.utils.exceptions import FormatError

MAGIC = b"UDAW"
VERSION = 1


def encode_params(state: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    for name, value in state.items():
        encoded = name.encode("utf-8")
        rows, cols = value.shape
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<QQ", rows, cols))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(chunks)


def decode_params(data: bytes) -> dict[str, np.ndarray]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError(f"expected magic {MAGIC.decode()}, found {data[:4]!r}", offset=0)
    if len(data) < 8:
        raise FormatError("truncated header", offset=len(data))
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported UDAW version {version}", offset=4)

    state: dict[str, np.ndarray] = {}
    offset = 8
    while offset < len(data):
        if offset + 2 > len(data):
            raise FormatError("truncated parameter name length", offset=offset)
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + length + 16 > len(data):
            raise FormatError("truncated parameter header", offset=offset)
        try:
            name = data[offset : offset + length].decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError("parameter name is not UTF-8", offset=offset) from e
        offset += length
        rows, cols = struct.unpack_from("<QQ", data, offset)
        offset += 16
        size = rows * cols * 8
        if offset + size > len(data):
            raise FormatError(f"truncated payload of {name}", offset=offset)
        state[name] = (
            np.frombuffer(data, dtype="<f8", count=rows * cols, offset=offset)
            .astype(np.float64)
            .reshape(rows, cols)
        )
        offset += size
    return state


def save_checkpoint(path: Path, bundle: ModelBundle) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_params(bundle.state_dict()))


def load_checkpoint(path: Path, bundle: ModelBundle) -> ModelBundle:
    """Load parameter values into ``bundle`` (in place) and return it."""
    bundle.load_state(decode_params(path.read_bytes()))
    return bundle
