"""
MPKD checkpoint format.

    magic    4 bytes  b"MPKD"
    version  u32 little-endian
    records  until end of file, each:
        name length u32, UTF-8 name, rank u32, dims u64 * rank, float32 * prod(dims)

All integers and floats are little-endian.
"""

from __future__ import annotations

import logging
import os
import struct
from typing import Mapping

import numpy as np

from ..errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"MPKD"
VERSION = 1


def encode_checkpoint(state: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    for name, value in state.items():
        raw_name = name.encode("utf-8")
        array = np.ascontiguousarray(value, dtype="<f4")
        parts.append(struct.pack("<I", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<I", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(array.tobytes())
    return b"".join(parts)


def decode_checkpoint(payload: bytes) -> dict[str, np.ndarray]:
    if payload[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {payload[:4]!r}, expected {MAGIC!r}")
    if len(payload) < 8:
        raise CheckpointError("checkpoint header truncated")
    (version,) = struct.unpack_from("<I", payload, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    state: dict[str, np.ndarray] = {}
    offset = 8
    try:
        while offset < len(payload):
            (name_len,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            name = payload[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            dims = struct.unpack_from(f"<{rank}Q", payload, offset)
            offset += 8 * rank
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            nbytes = 4 * count
            if offset + nbytes > len(payload):
                raise CheckpointError(f"record {name!r} truncated")
            state[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(dims).copy()
            offset += nbytes
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    return state


def save_checkpoint(path: str | os.PathLike, state: Mapping[str, np.ndarray]) -> None:
    payload = encode_checkpoint(state)
    with open(path, "wb") as fh:
        fh.write(payload)
    logger.info("wrote checkpoint %s (%d tensors, %d bytes)", path, len(state), len(payload))


def load_checkpoint(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
