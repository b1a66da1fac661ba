"""Record-level glue: filter -> normalize -> segment -> label -> vectors.

`prepare_record` produces the labeled training material for one
record; `infer_beats` runs the identical signal path without labels,
so the beats it yields match what `prepare_record` would keep (up to
label-based screening, which needs an ABP channel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp, segmentation as seg
from .config import PipelineConfig
from .dataset import LabeledBeats
from .errors import DataError
from .records import (
    BpLabel,
    LabelStats,
    RawRecord,
    discard_label_outliers,
    extract_bp_label,
    label_stats,
)


@dataclass
class PreparedRecord:
    subject_id: str
    beats: LabeledBeats
    cleaning: seg.CleaningStats
    labels: LabelStats
    label_outliers_removed: int


def _clean_segments(rec: RawRecord, cfg: PipelineConfig):
    """Shared front half of prepare/infer: cleaned beat segments."""
    cascade = dsp.design_bandpass(cfg.filter)
    filtered = dsp.apply_filter(cascade, rec.ppg)
    normalized = dsp.normalize_minmax(filtered)
    peaks = seg.detect_peaks(normalized.samples, min_distance=cfg.segmentation.min_distance)
    segments = seg.segment_beats(normalized.samples, peaks)
    kept, stats = seg.clean_beats(
        segments,
        min_len=cfg.segmentation.min_len,
        max_len=cfg.segmentation.max_len,
        amp_k=cfg.segmentation.amp_k,
    )
    return kept, stats


def prepare_record(rec: RawRecord, cfg: PipelineConfig) -> PreparedRecord:
    """Build the labeled beat set for one record.

    ABP beat windows reuse the PPG-derived beat boundaries.  Label
    outliers (any field beyond mean +/- label_k * std) are screened
    per record, after segment cleaning.
    """
    if rec.abp is None:
        raise DataError(f"record {rec.subject_id!r}: labels unavailable (no abp channel)")
    kept, stats = _clean_segments(rec, cfg)
    if not kept:
        raise DataError(f"record {rec.subject_id!r}: no beats survived cleaning")

    labels: list[BpLabel] = [
        extract_bp_label(rec.abp[s.start_index : s.start_index + s.samples.size])
        for s in kept
    ]
    survivors, removed = discard_label_outliers(labels, k=cfg.label_k)
    segments = [kept[i] for i, _ in survivors]
    final_labels = [lab for _, lab in survivors]
    if not segments:
        raise DataError(f"record {rec.subject_id!r}: no beats survived label screening")

    vectors = np.stack([seg.to_vector(s).values for s in segments])
    label_arr = np.array([[l.sbp, l.dbp, l.map] for l in final_labels])
    valid = np.array([s.samples.size for s in segments], dtype=np.uint16)
    return PreparedRecord(
        subject_id=rec.subject_id,
        beats=LabeledBeats(vectors=vectors, labels=label_arr, valid_len=valid),
        cleaning=stats,
        labels=label_stats(final_labels),
        label_outliers_removed=removed,
    )


def infer_beats(rec: RawRecord, cfg: PipelineConfig) -> tuple[np.ndarray, np.ndarray]:
    """Beat vectors for a PPG-only record: (start_indices, vectors)."""
    kept, _ = _clean_segments(rec, cfg)
    if not kept:
        raise DataError(f"record {rec.subject_id!r}: no beats survived cleaning")
    starts = np.array([s.start_index for s in kept], dtype=np.int64)
    vectors = np.stack([seg.to_vector(s).values for s in kept])
    return starts, vectors


def merge_prepared(parts: list[PreparedRecord]) -> PreparedRecord:
    """Pool several prepared records (e.g. multiple files of one subject)."""
    if not parts:
        raise DataError("nothing to merge")
    if len(parts) == 1:
        return parts[0]
    beats = LabeledBeats(
        vectors=np.concatenate([p.beats.vectors for p in parts]),
        labels=np.concatenate([p.beats.labels for p in parts]),
        valid_len=np.concatenate([p.beats.valid_len for p in parts]),
    )
    total = sum(p.cleaning.total_beats for p in parts)
    removed_len = sum(p.cleaning.removed_length for p in parts)
    removed_amp = sum(p.cleaning.removed_amplitude for p in parts)
    cleaning = seg.CleaningStats(
        total_beats=total,
        removed_length=removed_len,
        removed_amplitude=removed_amp,
        removed_fraction=(removed_len + removed_amp) / total,
    )
    pooled = [
        BpLabel(sbp=float(s), dbp=float(d), map=float(m))
        for s, d, m in np.concatenate([p.beats.labels for p in parts]).astype(np.float64)
    ]
    return PreparedRecord(
        subject_id="+".join(p.subject_id for p in parts),
        beats=beats,
        cleaning=cleaning,
        labels=label_stats(pooled),
        label_outliers_removed=sum(p.label_outliers_removed for p in parts),
    )
