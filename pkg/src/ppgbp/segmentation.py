"""Systolic peak detection, beat segmentation, outlier cleaning, vectors.

A heartbeat is the stretch of normalized PPG between two consecutive
systolic peaks.  Beats outside the plausible length range or with a
peak-to-trough amplitude far from the population are discarded, and
the survivors are zero-padded into fixed-length network input vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

VECTOR_LEN = 160

MIN_PEAK_DISTANCE = 30
MIN_BEAT_LEN = 30
MAX_BEAT_LEN = 160
AMPLITUDE_STD_LIMIT = 2.0


@dataclass
class PeakList:
    """Strictly increasing sample indices of accepted systolic peaks."""

    indices: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.size)


@dataclass
class BeatSegment:
    """One heartbeat's samples and where it starts in the source signal."""

    samples: np.ndarray
    start_index: int


@dataclass
class BeatVector:
    """Fixed-length network input: beat samples followed by zeros."""

    values: np.ndarray
    valid_len: int


@dataclass(frozen=True)
class CleaningStats:
    total_beats: int
    removed_length: int
    removed_amplitude: int
    removed_fraction: float


def _peak_candidates(x: np.ndarray) -> np.ndarray:
    """Local maxima, strictly above both neighbors; a plateau counts once
    and is reported at its leftmost sample."""
    # run-length encode equal-value runs, then compare run values
    starts = np.concatenate(([0], np.flatnonzero(np.diff(x) != 0) + 1))
    vals = x[starts]
    if vals.size < 3:
        return np.empty(0, dtype=np.intp)
    is_peak = (vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])
    return starts[1:-1][is_peak]


def detect_peaks(signal, min_distance: int = MIN_PEAK_DISTANCE) -> PeakList:
    """Find systolic peaks at least ``min_distance + 1`` samples apart.

    Candidates (strict local maxima) are accepted greedily in order of
    descending amplitude (ties: earlier sample first); accepting a
    peak suppresses every remaining candidate within ``min_distance``
    samples, so surviving peaks are pairwise more than ``min_distance``
    apart.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.size < 3:
        raise DataError(f"signal too short for peak detection ({x.size} < 3 samples)")
    cand = _peak_candidates(x)
    if cand.size == 0:
        return PeakList(indices=cand)
    order = np.argsort(-x[cand], kind="stable")
    keep = np.ones(cand.size, dtype=bool)
    for j in order:
        if not keep[j]:
            continue
        i = j - 1
        while i >= 0 and cand[j] - cand[i] <= min_distance:
            keep[i] = False
            i -= 1
        i = j + 1
        while i < cand.size and cand[i] - cand[j] <= min_distance:
            keep[i] = False
            i += 1
    return PeakList(indices=cand[keep])


def segment_beats(signal, peaks: PeakList) -> list[BeatSegment]:
    """Cut the signal at the peaks: one segment per consecutive peak pair,
    spanning [peak_i, peak_{i+1}).  Concatenating the segments
    reproduces the signal between the first and last peak exactly."""
    x = np.asarray(signal, dtype=np.float64)
    idx = peaks.indices
    if idx.size < 2:
        raise DataError(f"need at least 2 peaks to segment, got {idx.size}")
    return [
        BeatSegment(samples=x[a:b].copy(), start_index=int(a))
        for a, b in zip(idx[:-1], idx[1:])
    ]


def clean_beats(
    segments: list[BeatSegment],
    min_len: int = MIN_BEAT_LEN,
    max_len: int = MAX_BEAT_LEN,
    amp_k: float = AMPLITUDE_STD_LIMIT,
) -> tuple[list[BeatSegment], CleaningStats]:
    """Drop implausible beats; keep order; report what was removed.

    Length rule first: segments shorter than ``min_len`` or longer
    than ``max_len`` go.  Then the amplitude rule: over the
    length-valid segments, peak-to-trough amplitudes strictly outside
    mean +/- amp_k * std (population statistics, computed once) go.
    """
    if not segments:
        raise DataError("no segments to clean")
    total = len(segments)
    len_ok = [min_len <= s.samples.size <= max_len for s in segments]
    removed_length = total - sum(len_ok)
    survivors = [s for s, ok in zip(segments, len_ok) if ok]
    removed_amplitude = 0
    kept = survivors
    if survivors:
        amps = np.array([s.samples.max() - s.samples.min() for s in survivors])
        mean = amps.mean()
        std = amps.std()
        amp_ok = (amps >= mean - amp_k * std) & (amps <= mean + amp_k * std)
        removed_amplitude = int((~amp_ok).sum())
        kept = [s for s, ok in zip(survivors, amp_ok) if ok]
    stats = CleaningStats(
        total_beats=total,
        removed_length=removed_length,
        removed_amplitude=removed_amplitude,
        removed_fraction=(removed_length + removed_amplitude) / total,
    )
    return kept, stats


def to_vector(segment: BeatSegment, target_len: int = VECTOR_LEN) -> BeatVector:
    """Zero-pad one beat to ``target_len`` entries."""
    n = segment.samples.size
    if n > target_len:
        raise DataError(f"segment of {n} samples exceeds vector length {target_len}")
    values = np.zeros(target_len, dtype=np.float64)
    values[:n] = segment.samples
    return BeatVector(values=values, valid_len=int(n))
