"""Minimal PGM (P2/P5) reader and writer with 16-bit support."""
from __future__ import annotations

import numpy as np


def _tokens(data: bytes, count: int, pos: int = 0):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def decode_pgm(data: bytes) -> np.ndarray:
    (magic, w, h, maxval), pos = _tokens(data, 4)
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval <= 0xFFFF:
        raise ValueError(f"bad PGM maxval {maxval}")
    if magic == b"P5":
        pos += 1  # single whitespace byte before the raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raster = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    elif magic == b"P2":
        raster = np.array(data[pos:].split()[:w * h], dtype=np.int64)
        if raster.size != w * h:
            raise ValueError("truncated PGM raster")
    else:
        raise ValueError(f"not a PGM file (magic {magic!r})")
    return raster.reshape(h, w).astype(np.uint16)


def encode_pgm(img) -> bytes:
    """P5 with maxval 255 when every value fits in a byte, else 65535."""
    a = np.asarray(img)
    if a.ndim != 2:
        raise ValueError("PGM holds a single 2-D plane")
    if a.size and (a.min() < 0 or a.max() > 0xFFFF):
        raise ValueError("values must fit in 16 bits")
    h, w = a.shape
    if a.size == 0 or a.max() <= 255:
        return f"P5\n{w} {h}\n255\n".encode() + a.astype(np.uint8).tobytes()
    return f"P5\n{w} {h}\n65535\n".encode() + a.astype(">u2").tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_pgm(path, img) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))
