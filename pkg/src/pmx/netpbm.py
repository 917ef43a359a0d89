"""Binary NetPBM image output (PGM P5, PPM P6) and minimal readers.

All quantization goes through one rule, round half up: u8 = floor(255 v + 0.5)
for v in [0, 1].  Normals are mapped (n + 1)/2 before quantization, so a
component of -1 lands at 0 and 0.0 lands at 128.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .errors import FormatError


def quantize(v: np.ndarray) -> np.ndarray:
    """[0,1] floats to u8 by round-half-up."""
    return np.clip(np.floor(v * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_pgm(path: str, gray: np.ndarray) -> None:
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise FormatError(f"PGM needs a 2D uint8 array, got {gray.shape} {gray.dtype}")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(gray.tobytes())


def write_ppm(path: str, rgb: np.ndarray) -> None:
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise FormatError(f"PPM needs (H,W,3) uint8, got {rgb.shape} {rgb.dtype}")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def _read_header(blob: bytes, magic: bytes) -> Tuple[int, int, int]:
    if not blob.startswith(magic):
        raise FormatError(f"bad NetPBM magic {blob[:2]!r}")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(blob[start:pos]))
    return fields[0], fields[1], pos + 1


def read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    w, h, off = _read_header(blob, b"P5")
    return np.frombuffer(blob, np.uint8, h * w, off).reshape(h, w).copy()


def read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    w, h, off = _read_header(blob, b"P6")
    return np.frombuffer(blob, np.uint8, h * w * 3, off).reshape(h, w, 3).copy()
