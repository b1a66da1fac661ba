"""Labeled beat dataset container and its on-disk format.

File layout (little-endian): magic ``BEAT``, u32 version, u32 count,
then per beat a u16 valid length, 160 f32 vector entries, and the
3 f32 labels (sbp, dbp, map).  A JSON sidecar written next to the file
carries cleaning and label statistics.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError
from .segmentation import VECTOR_LEN

BEAT_MAGIC = b"BEAT"
BEAT_VERSION = 1


@dataclass
class LabeledBeats:
    """Beat vectors with aligned labels (and original segment lengths)."""

    vectors: np.ndarray    # (n, VECTOR_LEN) float32
    labels: np.ndarray     # (n, 3) float32: sbp, dbp, map
    valid_len: np.ndarray  # (n,) uint16

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.float32)
        self.valid_len = np.asarray(self.valid_len, dtype=np.uint16)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != VECTOR_LEN:
            raise DataError(f"expected (n, {VECTOR_LEN}) vectors, got {self.vectors.shape}")
        if self.labels.shape != (self.vectors.shape[0], 3):
            raise DataError(f"labels shape {self.labels.shape} does not match vectors")
        if self.valid_len.shape != (self.vectors.shape[0],):
            raise DataError("valid_len does not match vector count")

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def subset(self, indices) -> "LabeledBeats":
        idx = np.asarray(indices)
        return LabeledBeats(self.vectors[idx], self.labels[idx], self.valid_len[idx])


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def write_beats(path: str | Path, beats: LabeledBeats, sidecar: dict | None = None) -> None:
    path = Path(path)
    n = len(beats)
    parts = [struct.pack("<4sII", BEAT_MAGIC, BEAT_VERSION, n)]
    for i in range(n):
        parts.append(struct.pack("<H", int(beats.valid_len[i])))
        parts.append(beats.vectors[i].astype("<f4").tobytes())
        parts.append(beats.labels[i].astype("<f4").tobytes())
    path.write_bytes(b"".join(parts))
    if sidecar is not None:
        sidecar_path(path).write_text(json.dumps(sidecar, indent=2) + "\n")


def read_beats(path: str | Path) -> LabeledBeats:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    blob = path.read_bytes()
    head = struct.Struct("<4sII")
    if len(blob) < head.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n = head.unpack_from(blob, 0)
    if magic != BEAT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != BEAT_VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")
    rec_size = 2 + 4 * VECTOR_LEN + 4 * 3
    if len(blob) != head.size + n * rec_size:
        raise FormatError(f"{path}: payload size does not match {n} beats")
    valid_len = np.empty(n, dtype=np.uint16)
    vectors = np.empty((n, VECTOR_LEN), dtype=np.float32)
    labels = np.empty((n, 3), dtype=np.float32)
    off = head.size
    for i in range(n):
        (valid_len[i],) = struct.unpack_from("<H", blob, off)
        off += 2
        vectors[i] = np.frombuffer(blob, dtype="<f4", count=VECTOR_LEN, offset=off)
        off += 4 * VECTOR_LEN
        labels[i] = np.frombuffer(blob, dtype="<f4", count=3, offset=off)
        off += 12
    return LabeledBeats(vectors=vectors, labels=labels, valid_len=valid_len)


def read_sidecar(path: str | Path) -> dict | None:
    sp = sidecar_path(path)
    if not sp.exists():
        return None
    return json.loads(sp.read_text())
