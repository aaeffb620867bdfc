"""Light-field container files and per-view PGM/PPM directories.

Container layout (little-endian)::

    b"LFSR" | version u16 = 1 | U, V, H, W u32 | channels u8 | dtype u8 | color u8 | payload

``dtype`` is 0 for 8-bit samples and 1 for float32; the payload is planar in
(u, v, c, y, x) order.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .lightfield import ColorTag, LightField

MAGIC = b"LFSR"
VERSION = 1
_HEADER = struct.Struct("<4sH4IBBB")
_DTYPES = {0: np.dtype(np.uint8), 1: np.dtype("<f4")}


class LightFieldFormatError(ValueError):
    pass


def save_lf(lf: LightField, path) -> None:
    code = 0 if lf.data.dtype == np.uint8 else 1
    header = _HEADER.pack(MAGIC, VERSION, lf.U, lf.V, lf.H, lf.W, lf.channels, code, int(lf.color))
    payload = np.ascontiguousarray(lf.data, dtype=_DTYPES[code]).tobytes()
    Path(path).write_bytes(header + payload)


def load_lf(path) -> LightField:
    """Read a container file, or ingest a directory of ``view_{u}_{v}`` images."""
    path = Path(path)
    if path.is_dir():
        return load_view_directory(path)
    buf = path.read_bytes()
    if buf[:4] != MAGIC:
        raise LightFieldFormatError(f"bad magic in {path}")
    if len(buf) < _HEADER.size:
        raise LightFieldFormatError(f"truncated header in {path}")
    _, version, U, V, H, W, ch, code, color = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise LightFieldFormatError(f"unsupported container version {version}")
    if code not in _DTYPES:
        raise LightFieldFormatError(f"unsupported dtype code {code}")
    if color not in (0, 1, 2):
        raise LightFieldFormatError(f"unknown color tag {color}")
    if ch not in (1, 3) or (ch == 1) != (color == 0):
        raise LightFieldFormatError(f"dimension/channel inconsistency: {ch} channel(s) with color tag {color}")
    dtype = _DTYPES[code]
    count = U * V * ch * H * W
    expected = _HEADER.size + count * dtype.itemsize
    if len(buf) < expected:
        raise LightFieldFormatError(f"truncated payload: expected {expected} bytes, found {len(buf)}")
    if len(buf) > expected:
        raise LightFieldFormatError(f"dimension inconsistency: {len(buf) - expected} trailing bytes")
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=_HEADER.size).reshape(U, V, ch, H, W)
    data = data.astype(np.uint8 if code == 0 else np.float32)
    try:
        return LightField(data, ColorTag(color))
    except ValueError as exc:
        raise LightFieldFormatError(str(exc)) from exc


_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def read_pnm(path) -> np.ndarray:
    """Binary PGM (P5) -> (1, H, W) or PPM (P6) -> (3, H, W), uint8."""
    buf = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise LightFieldFormatError(f"malformed PNM header in {path}")
        fields.append(m.group(1))
        pos = m.end()
    magic = fields[0]
    if magic not in (b"P5", b"P6"):
        raise LightFieldFormatError(f"{path}: only binary PGM (P5) and PPM (P6) are supported")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise LightFieldFormatError(f"malformed PNM header in {path}") from exc
    if maxval != 255:
        raise LightFieldFormatError(f"{path}: maxval {maxval} unsupported (need 255)")
    pos += 1  # single whitespace byte before the raster
    ch = 1 if magic == b"P5" else 3
    need = w * h * ch
    raster = buf[pos : pos + need]
    if len(raster) < need:
        raise LightFieldFormatError(f"truncated raster in {path}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, ch).transpose(2, 0, 1).copy()


def write_pnm(path, img: np.ndarray) -> None:
    """Write a (1, H, W) or (3, H, W) uint8 array as binary PGM/PPM."""
    img = np.asarray(img)
    ch, h, w = img.shape
    magic = {1: b"P5", 3: b"P6"}[ch]
    header = magic + b"\n%d %d\n255\n" % (w, h)
    Path(path).write_bytes(header + np.ascontiguousarray(img.transpose(1, 2, 0), dtype=np.uint8).tobytes())


_VIEW_NAME = re.compile(r"^view_(\d+)_(\d+)\.(pgm|ppm)$", re.IGNORECASE)


def load_view_directory(path) -> LightField:
    path = Path(path)
    views: Dict[Tuple[int, int], Path] = {}
    for entry in sorted(path.iterdir()):
        m = _VIEW_NAME.match(entry.name)
        if m:
            views[(int(m.group(1)), int(m.group(2)))] = entry
    if not views:
        raise LightFieldFormatError(f"no view_{{u}}_{{v}} images found in {path}")
    U = max(u for u, _ in views) + 1
    V = max(v for _, v in views) + 1
    missing = [(u, v) for u in range(U) for v in range(V) if (u, v) not in views]
    if missing:
        raise LightFieldFormatError(f"incomplete angular grid: missing views {missing[:4]}")
    first = read_pnm(views[(0, 0)])
    data = np.empty((U, V) + first.shape, dtype=np.uint8)
    for (u, v), file in views.items():
        img = read_pnm(file)
        if img.shape != first.shape:
            raise LightFieldFormatError(f"dimension inconsistency: {file.name} is {img.shape}, expected {first.shape}")
        data[u, v] = img
    return LightField(data, ColorTag.Y if first.shape[0] == 1 else ColorTag.RGB)


def save_view_directory(lf: LightField, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lf8 = lf.to_uint8()
    ext = "pgm" if lf.channels == 1 else "ppm"
    for u in range(lf.U):
        for v in range(lf.V):
            write_pnm(path / f"view_{u}_{v}.{ext}", lf8.data[u, v])
