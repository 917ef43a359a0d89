"""Bit-exact binary container formats.

Dataset files (magic ``PMXD``) hold a fixed header followed by packed
per-sample payloads; checkpoint files (magic ``PMXC``) hold named f32
tensors sorted by name with a trailing FNV-1a checksum, so two writes of
the same content are byte-identical and any flipped byte is detected on
read.  Both formats are little-endian throughout and written atomically
(temp file in the same directory, then rename).

A dataset may carry a sidecar manifest: UTF-8 JSON at ``path + ".json"``
recording the generator seed, the scene configuration, class names, and
the normal-frame convention.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ContractError, CorruptionError, FormatError
from .scene import Sample

DATASET_MAGIC = b"PMXD"
CHECKPOINT_MAGIC = b"PMXC"
VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _atomic_write(path: str, blob: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


# ---- dataset ------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetHeader:
    count: int
    h: int
    w: int
    classes: int
    d_min: float
    d_max: float


def write_dataset(
    path: str,
    samples: Sequence[Sample],
    classes: int,
    d_min: float,
    d_max: float,
    manifest: dict = None,
) -> None:
    if len(samples) == 0:
        raise ContractError("dataset must contain at least one sample")
    h, w = samples[0].labels.shape
    parts = [
        DATASET_MAGIC,
        struct.pack("<IIHHH", VERSION, len(samples), h, w, classes),
        struct.pack("<ff", d_min, d_max),
    ]
    for i, s in enumerate(samples):
        if s.image.shape != (h, w, 3) or s.labels.shape != (h, w) \
                or s.depth.shape != (h, w) or s.normal.shape != (h, w, 3):
            raise ContractError(f"sample {i} shape differs from sample 0")
        parts.append(s.image.astype("<f4").tobytes())
        parts.append(s.labels.astype(np.uint8).tobytes())
        parts.append(s.depth.astype("<f4").tobytes())
        parts.append(s.normal.astype("<f4").tobytes())
    _atomic_write(path, b"".join(parts))
    if manifest is not None:
        _atomic_write(path + ".json", json.dumps(manifest, sort_keys=True, indent=1).encode())


def read_dataset(path: str) -> Tuple[DatasetHeader, List[Sample]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != DATASET_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 26:
        raise FormatError(f"{path}: truncated header at offset {len(blob)}")
    version, count, h, w, classes = struct.unpack_from("<IIHHH", blob, 4)
    d_min, d_max = struct.unpack_from("<ff", blob, 18)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    hdr = DatasetHeader(count, h, w, classes, d_min, d_max)
    per = h * w * (3 * 4 + 1 + 4 + 3 * 4)
    need = 26 + per * count
    if len(blob) != need:
        raise FormatError(f"{path}: expected {need} bytes, file ends at offset {len(blob)}")
    samples = []
    off = 26
    hw = h * w
    for _ in range(count):
        image = np.frombuffer(blob, "<f4", hw * 3, off).reshape(h, w, 3).copy()
        off += hw * 12
        labels = np.frombuffer(blob, np.uint8, hw, off).reshape(h, w).copy()
        off += hw
        depth = np.frombuffer(blob, "<f4", hw, off).reshape(h, w).copy()
        off += hw * 4
        normal = np.frombuffer(blob, "<f4", hw * 3, off).reshape(h, w, 3).copy()
        off += hw * 12
        samples.append(Sample(image, labels, depth, normal))
    return hdr, samples


def read_manifest(path: str) -> dict:
    with open(path + ".json", "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---- checkpoints -----------------------------------------------------------------


def write_checkpoint(path: str, tensors: Dict[str, np.ndarray]) -> None:
    """Named f32 tensors, sorted by name.  Reserved name prefixes: ``opt/``
    for optimizer state (moments, step count) and ``meta/`` for scalar
    model-config entries; both are ordinary tensors to this format."""
    names = sorted(tensors)
    if len(names) != len(set(names)):
        raise ContractError("duplicate tensor names")
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", VERSION, len(names))]
    for name in names:
        arr = np.asarray(tensors[name], dtype="<f4")
        enc = name.encode("utf-8")
        parts.append(struct.pack("<H", len(enc)))
        parts.append(enc)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    _atomic_write(path, body + struct.pack("<Q", fnv1a64(body)))


def read_checkpoint(path: str) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 20:
        raise FormatError(f"{path}: truncated at offset {len(blob)}")
    body, tail = blob[:-8], blob[-8:]
    if fnv1a64(body) != struct.unpack("<Q", tail)[0]:
        raise CorruptionError(f"{path}: checksum mismatch")
    version, count = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    out: Dict[str, np.ndarray] = {}
    off = 12
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", body, off)
        off += 2
        name = body[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<B", body, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", body, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(body, "<f4", n, off).reshape(dims).copy()
        off += 4 * n
        out[name] = arr.astype(np.float32)
    if off != len(body):
        raise FormatError(f"{path}: {len(body) - off} trailing bytes after entries")
    return out
