"""Waveform record I/O and per-beat blood-pressure label handling.

Records carry a PPG stream and, when ground truth is available, a
synchronized ABP stream on the same time base.  Labels (SBP, DBP, MAP)
are read off the ABP samples of each heartbeat.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, FormatError

DEFAULT_FS = 125.0

RECORD_MAGIC = b"PPGR"
RECORD_VERSION = 1


@dataclass
class RawRecord:
    """Synchronized PPG (and optionally ABP) sample streams."""

    subject_id: str
    fs: float
    ppg: np.ndarray
    abp: np.ndarray | None = None


@dataclass(frozen=True)
class BpLabel:
    """Per-beat blood pressure triple, mmHg."""

    sbp: float
    dbp: float
    map: float


@dataclass(frozen=True)
class LabelStats:
    """Mean and population standard deviation of each label field, mmHg."""

    mean_sbp: float
    std_sbp: float
    mean_dbp: float
    std_dbp: float
    mean_map: float
    std_map: float


def mean_arterial(sbp: float, dbp: float) -> float:
    """Mean arterial pressure from the systolic/diastolic pair."""
    return (2.0 * dbp + sbp) / 3.0


def _validate_record(rec: RawRecord) -> RawRecord:
    if rec.fs <= 0:
        raise DataError(f"sampling rate must be positive, got {rec.fs}")
    if rec.ppg.size == 0:
        raise FormatError(f"record {rec.subject_id!r} contains no samples")
    if not np.all(np.isfinite(rec.ppg)):
        raise DataError(f"record {rec.subject_id!r}: non-finite ppg sample")
    if rec.abp is not None:
        if rec.abp.size != rec.ppg.size:
            raise DataError(
                f"record {rec.subject_id!r}: length mismatch, "
                f"ppg has {rec.ppg.size} samples but abp has {rec.abp.size}"
            )
        if not np.all(np.isfinite(rec.abp)):
            raise DataError(f"record {rec.subject_id!r}: non-finite abp sample")
    return rec


def _load_csv(path: Path) -> RawRecord:
    fs = DEFAULT_FS
    ppg: list[float] = []
    abp: list[float] = []
    n_two_col = 0
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            if line.startswith("#"):
                if lineno != 1:
                    raise FormatError(f"{path}:{lineno}: comment allowed only as header")
                body = line.lstrip("#").strip()
                if not body.startswith("fs="):
                    raise FormatError(f"{path}:{lineno}: header must look like '# fs=<Hz>'")
                try:
                    fs = float(body[3:])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad sampling rate {body[3:]!r}") from None
                continue
            fields = line.split(",")
            if len(fields) > 2:
                raise FormatError(f"{path}:{lineno}: expected 'ppg[,abp]', got {len(fields)} columns")
            if any(f.strip() == "" for f in fields):
                raise FormatError(f"{path}:{lineno}: missing column value")
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: unparseable sample {line!r}") from None
            ppg.append(values[0])
            if len(values) == 2:
                abp.append(values[1])
                n_two_col += 1
    if n_two_col not in (0, len(ppg)):
        raise DataError(
            f"{path}: length mismatch, ppg has {len(ppg)} samples but abp column has {n_two_col}"
        )
    rec = RawRecord(
        subject_id=path.stem,
        fs=fs,
        ppg=np.asarray(ppg, dtype=np.float64),
        abp=np.asarray(abp, dtype=np.float64) if n_two_col else None,
    )
    return _validate_record(rec)


def _load_binary(path: Path) -> RawRecord:
    blob = path.read_bytes()
    header = struct.Struct("<4sId Q")
    if len(blob) < header.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, fs, n = header.unpack_from(blob, 0)
    if magic != RECORD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != RECORD_VERSION:
        raise FormatError(f"{path}: unsupported record version {version}")
    off = header.size
    need = n * 4 + 1
    if len(blob) < off + need:
        raise FormatError(f"{path}: truncated sample payload")
    ppg = np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float64)
    off += n * 4
    has_abp = blob[off]
    off += 1
    abp = None
    if has_abp:
        if len(blob) < off + n * 4:
            raise FormatError(f"{path}: truncated abp payload")
        abp = np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float64)
        off += n * 4
    if off != len(blob):
        raise FormatError(f"{path}: {len(blob) - off} trailing bytes")
    return _validate_record(RawRecord(subject_id=path.stem, fs=fs, ppg=ppg, abp=abp))


def load_record(path: str | Path, format: str = "auto") -> RawRecord:
    """Load a waveform record.

    ``format`` is ``csv``, ``binary`` or ``auto`` (sniff: binary magic,
    else CSV).  CSV: optional first line ``# fs=<Hz>`` (default 125),
    then one ``ppg[,abp]`` row per sample.  Binary: little-endian
    ``PPGR`` container with f32 samples.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    if format == "auto":
        with open(path, "rb") as fh:
            format = "binary" if fh.read(4) == RECORD_MAGIC else "csv"
    if format == "csv":
        return _load_csv(path)
    if format == "binary":
        return _load_binary(path)
    raise DataError(f"unknown record format {format!r}")


def save_record(rec: RawRecord, path: str | Path, format: str = "binary") -> None:
    """Write a record in either on-disk format (utility for demos/tests)."""
    path = Path(path)
    _validate_record(rec)
    if format == "binary":
        parts = [struct.pack("<4sId Q", RECORD_MAGIC, RECORD_VERSION, rec.fs, rec.ppg.size)]
        parts.append(np.asarray(rec.ppg, dtype="<f4").tobytes())
        parts.append(struct.pack("<B", 1 if rec.abp is not None else 0))
        if rec.abp is not None:
            parts.append(np.asarray(rec.abp, dtype="<f4").tobytes())
        path.write_bytes(b"".join(parts))
    elif format == "csv":
        with open(path, "w") as fh:
            fh.write(f"# fs={rec.fs:g}\n")
            if rec.abp is None:
                for p in rec.ppg:
                    fh.write(f"{p!r}\n")
            else:
                for p, a in zip(rec.ppg, rec.abp):
                    fh.write(f"{p!r},{a!r}\n")
    else:
        raise DataError(f"unknown record format {format!r}")


def extract_bp_label(abp_beat: Sequence[float] | np.ndarray) -> BpLabel:
    """Label one heartbeat from its ABP samples.

    SBP and DBP are the maximum and minimum ABP amplitude within the
    beat; MAP = (2*DBP + SBP) / 3.
    """
    beat = np.asarray(abp_beat, dtype=np.float64)
    if beat.size == 0:
        raise DataError("empty abp segment")
    if not np.all(np.isfinite(beat)):
        raise DataError("non-finite abp sample in beat")
    sbp = float(beat.max())
    dbp = float(beat.min())
    return BpLabel(sbp=sbp, dbp=dbp, map=mean_arterial(sbp, dbp))


def label_stats(labels: Sequence[BpLabel]) -> LabelStats:
    """Per-field mean and population (n) standard deviation."""
    if len(labels) == 0:
        raise DataError("no labels")
    arr = np.array([[l.sbp, l.dbp, l.map] for l in labels], dtype=np.float64)
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)  # population, ddof=0
    return LabelStats(
        mean_sbp=float(mean[0]), std_sbp=float(std[0]),
        mean_dbp=float(mean[1]), std_dbp=float(std[1]),
        mean_map=float(mean[2]), std_map=float(std[2]),
    )


def outlier_mask(labels: Sequence[BpLabel], stats: LabelStats, k: float) -> np.ndarray:
    """True where any of sbp/dbp/map lies strictly outside mean +/- k*std."""
    arr = np.array([[l.sbp, l.dbp, l.map] for l in labels], dtype=np.float64)
    mean = np.array([stats.mean_sbp, stats.mean_dbp, stats.mean_map])
    std = np.array([stats.std_sbp, stats.std_dbp, stats.std_map])
    lo = mean - k * std
    hi = mean + k * std
    return np.any((arr < lo) | (arr > hi), axis=1)


def discard_label_outliers(
    labels: Sequence[BpLabel], k: float = 5.0
) -> tuple[list[tuple[int, BpLabel]], int]:
    """Drop labels outside mean +/- k*std of any field.

    Statistics are computed once over the full input set (not
    recomputed after removals).  Returns the kept labels paired with
    their original indices, plus the number removed.
    """
    if len(labels) < 2:
        raise DataError(f"need at least 2 labels to screen outliers, got {len(labels)}")
    mask = outlier_mask(labels, label_stats(labels), k)
    kept = [(i, lab) for i, (lab, bad) in enumerate(zip(labels, mask)) if not bad]
    return kept, int(mask.sum())
