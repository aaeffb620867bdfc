"""Binary checkpoint container for named rank-4 arrays.

Layout (little-endian): magic ``DDANCKPT``, version u16, count u32, then per
entry a u16 name length, the UTF-8 name, four u32 dims and the raw float32
payload in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Mapping

import numpy as np

MAGIC = b"DDANCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: Mapping[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.ndim != 4:
            raise CheckpointError(f"entry {name!r} is not rank 4: {arr.shape}")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise CheckpointError(f"entry name too long: {name[:40]}...")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<4I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_arrays(path) -> Dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic: not a DDAN checkpoint")
    pos = len(MAGIC)
    if len(buf) < pos + 6:
        raise CheckpointError("truncated checkpoint header")
    version, count = struct.unpack_from("<HI", buf, pos)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos += 6
    out: Dict[str, np.ndarray] = {}
    for _ in range(count):
        if len(buf) < pos + 2:
            raise CheckpointError("truncated checkpoint entry")
        (n,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + n].decode("utf-8")
        pos += n
        if len(buf) < pos + 16:
            raise CheckpointError(f"truncated dims for entry {name!r}")
        dims = struct.unpack_from("<4I", buf, pos)
        pos += 16
        size = 4 * int(np.prod(dims))
        if len(buf) < pos + size:
            raise CheckpointError(f"truncated payload for entry {name!r}")
        if name in out:
            raise CheckpointError(f"duplicate entry {name!r}")
        out[name] = np.frombuffer(buf, dtype="<f4", count=size // 4, offset=pos).reshape(dims).astype(np.float32)
        pos += size
    if pos != len(buf):
        raise CheckpointError("trailing bytes after last checkpoint entry")
    return out
