"""On-disk tensor formats.

Binary tensor file (.vstf): magic ``VSTF``, u32 little-endian version (1),
u32 rank, rank u32 dims, then dims-product float32 little-endian values in
row-major order.  Used for frames, feature streams, probability vectors and
masks (masks stored as 0.0/1.0).  Arrays are returned as float64 whose
values are exactly the stored float32s, so save/load round-trips are
byte-identical.

PGM: binary P5 with maxval 255, accepted for frames as a human-viewable
alternative.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .numerics import DTYPE

MAGIC = b"VSTF"
VERSION = 1


def save_tensor(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.dtype == np.bool_:
        array = array.astype(np.float32)
    data = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + struct.pack("<II", VERSION, data.ndim)
    header += struct.pack(f"<{data.ndim}I", *data.shape)
    Path(path).write_bytes(header + data.tobytes())


def load_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise DataError(f"{path}: truncated tensor header")
    if raw[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {raw[:4]!r}")
    version, rank = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported tensor version {version}")
    if len(raw) < 12 + 4 * rank:
        raise DataError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{rank}I", raw, 12)
    count = int(np.prod(dims)) if rank else 1
    offset = 12 + 4 * rank
    if len(raw) != offset + 4 * count:
        raise DataError(f"{path}: payload size mismatch for dims {dims}")
    values = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    return values.astype(DTYPE).reshape(dims)


def save_pgm(path, frame: np.ndarray) -> None:
    """Write one grayscale frame as binary PGM (P5, maxval 255)."""
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ValueError(f"PGM frame must be 2-D, got {frame.shape}")
    pixels = np.clip(np.rint(frame), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def _pgm_tokens(raw: bytes):
    """Yield header tokens, skipping whitespace and # comments."""
    i = 0
    n = len(raw)
    while i < n:
        c = raw[i:i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < n and raw[i:i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < n and not raw[j:j + 1].isspace():
                j += 1
            yield raw[i:j], j
            i = j


def load_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens = _pgm_tokens(raw)
    try:
        magic, _ = next(tokens)
        if magic != b"P5":
            raise DataError(f"{path}: not a binary PGM (magic {magic!r})")
        (w_tok, _), (h_tok, _), (max_tok, end) = next(tokens), next(tokens), next(tokens)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except (StopIteration, ValueError) as exc:
        raise DataError(f"{path}: garbled PGM header") from exc
    if maxval != 255:
        raise DataError(f"{path}: unsupported maxval {maxval}")
    start = end + 1  # single whitespace byte after maxval
    expected = width * height
    pixels = np.frombuffer(raw, dtype=np.uint8, count=-1, offset=start)
    if pixels.size != expected:
        raise DataError(f"{path}: expected {expected} pixels, found {pixels.size}")
    return pixels.astype(DTYPE).reshape(height, width)
