"""Minimal 8-bit greyscale PGM reader/writer (ASCII P2 and binary P5)."""

from __future__ import annotations

import numpy as np


class PgmFormatError(ValueError):
    """Input is not an 8-bit P2/P5 greyscale PGM."""


def read_pgm(path) -> np.ndarray:
    """Read a PGM file into a (height, width) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] not in (b"P2", b"P5"):
        raise PgmFormatError("not a P2/P5 PGM file")
    magic = data[:2].decode()

    # header tokens: magic, width, height, maxval (comments start with #)
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmFormatError("truncated header")
        tokens.append(data[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PgmFormatError(f"bad header token: {exc}") from exc
    if width <= 0 or height <= 0:
        raise PgmFormatError("non-positive image dimensions")
    if maxval != 255:
        raise PgmFormatError(f"only 8-bit images supported (maxval {maxval})")

    if magic == "P5":
        pos += 1                       # single whitespace after maxval
        raster = data[pos:pos + width * height]
        if len(raster) < width * height:
            raise PgmFormatError("truncated raster")
        img = np.frombuffer(raster, dtype=np.uint8, count=width * height)
    else:
        try:
            values = [int(t) for t in data[pos:].split()]
        except ValueError as exc:
            raise PgmFormatError(f"bad ASCII sample: {exc}") from exc
        if len(values) < width * height:
            raise PgmFormatError("truncated raster")
        img = np.array(values[:width * height], dtype=np.uint16)
        if img.max(initial=0) > 255:
            raise PgmFormatError("sample exceeds maxval")
        img = img.astype(np.uint8)
    return img.reshape(height, width)


def write_pgm(img: np.ndarray, path, binary: bool = True) -> None:
    """Write a uint8 array as P5 (binary) or P2 (ASCII)."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    if img.dtype != np.uint8:
        if img.min() < 0 or img.max() > 255:
            raise ValueError("image values must fit uint8")
        img = img.astype(np.uint8)
    h, w = img.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(img.tobytes())
    else:
        lines = [f"P2\n{w} {h}\n255"]
        for row in img:
            lines.append(" ".join(str(int(x)) for x in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
