import numpy as np
import pytest

from ppgbp import DataError
from ppgbp.segmentation import (
    BeatSegment,
    PeakList,
    clean_beats,
    detect_peaks,
    segment_beats,
    to_vector,
)


def oracle_detect(x, min_distance):
    """Brute-force reference: strict local maxima (plateaus at their
    leftmost sample), then greedy acceptance by descending amplitude
    with earlier-index tie-breaks, O(n^2) distance checks."""
    x = np.asarray(x, dtype=np.float64)
    candidates = []
    i = 1
    while i < len(x) - 1:
        j = i
        while j + 1 < len(x) and x[j + 1] == x[j]:
            j += 1
        if j < len(x) - 1 and x[i] > x[i - 1] and x[i] > x[j + 1]:
            candidates.append(i)
        i = j + 1
    kept = []
    for idx in sorted(candidates, key=lambda c: (-x[c], c)):
        if all(abs(idx - other) > min_distance for other in kept):
            kept.append(idx)
    return np.array(sorted(kept), dtype=np.intp)


def sinusoid(freq=1.0, fs=125.0, seconds=3.0):
    t = np.arange(int(fs * seconds)) / fs
    return np.sin(2 * np.pi * freq * t)


class TestDetectPeaks:
    def test_sinusoid_three_peaks(self):
        x = sinusoid()
        peaks = detect_peaks(x, min_distance=30)
        assert len(peaks) == 3
        gaps = np.diff(peaks.indices)
        assert np.all(np.abs(gaps - 125) <= 1)
        np.testing.assert_array_equal(peaks.indices, oracle_detect(x, 30))

    def test_monotone_ramp_has_no_peaks(self):
        assert len(detect_peaks(np.arange(100.0), min_distance=30)) == 0

    def test_close_pair_keeps_taller(self):
        x = np.zeros(60)
        x[20] = 1.0
        x[30] = 0.8  # 10 samples apart
        peaks = detect_peaks(x, min_distance=30)
        np.testing.assert_array_equal(peaks.indices, [20])
        np.testing.assert_array_equal(peaks.indices, oracle_detect(x, 30))

    def test_too_short_errors(self):
        with pytest.raises(DataError, match="too short"):
            detect_peaks([1.0, 2.0], min_distance=30)

    def test_plateau_reports_leftmost(self):
        x = np.array([0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0])
        np.testing.assert_array_equal(detect_peaks(x, min_distance=1).indices, [2])

    def test_plateau_touching_edge_is_not_a_peak(self):
        x = np.array([2.0, 2.0, 1.0, 0.0])
        assert len(detect_peaks(x, min_distance=1)) == 0

    def test_equal_height_tie_keeps_earlier(self):
        x = np.zeros(50)
        x[10] = 1.0
        x[25] = 1.0  # 15 apart: conflict at min_distance 30, earlier wins
        peaks = detect_peaks(x, min_distance=30)
        np.testing.assert_array_equal(peaks.indices, [10])
        np.testing.assert_array_equal(peaks.indices, oracle_detect(x, 30))

    def test_matches_oracle_on_random_signals(self):
        rng = np.random.default_rng(12)
        for trial in range(25):
            n = int(rng.integers(50, 600))
            raw = rng.normal(size=n)
            width = int(rng.integers(1, 12))
            smooth = np.convolve(raw, np.ones(width) / width, mode="same")
            if rng.random() < 0.3:  # provoke plateaus
                smooth = np.round(smooth, 1)
            dist = int(rng.integers(1, 60))
            mine = detect_peaks(smooth, min_distance=dist).indices
            np.testing.assert_array_equal(mine, oracle_detect(smooth, dist))

    def test_invariants_on_smooth_fixture(self):
        rng = np.random.default_rng(13)
        x = np.convolve(rng.normal(size=2000), np.ones(9) / 9, mode="same")
        peaks = detect_peaks(x, min_distance=30).indices
        assert np.all(np.diff(peaks) > 30)
        for p in peaks:
            assert x[p] >= x[p - 1] and x[p] >= x[p + 1]


class TestSegmentBeats:
    def test_boundary_arithmetic(self):
        x = np.arange(500.0)
        segs = segment_beats(x, PeakList(indices=np.array([100, 220, 350])))
        assert [s.samples.size for s in segs] == [120, 130]
        assert [s.start_index for s in segs] == [100, 220]

    def test_single_peak_errors(self):
        with pytest.raises(DataError, match="at least 2 peaks"):
            segment_beats(np.arange(100.0), PeakList(indices=np.array([42])))

    def test_concatenation_is_lossless(self):
        rng = np.random.default_rng(14)
        x = np.convolve(rng.normal(size=3000), np.ones(7) / 7, mode="same")
        peaks = detect_peaks(x, min_distance=25)
        segs = segment_beats(x, peaks)
        joined = np.concatenate([s.samples for s in segs])
        np.testing.assert_array_equal(joined, x[peaks.indices[0] : peaks.indices[-1]])

    def test_uniform_sinusoid_segments(self):
        x = sinusoid(seconds=6.0)
        peaks = detect_peaks(x, min_distance=30)
        segs = segment_beats(x, peaks)
        assert all(abs(s.samples.size - 125) <= 1 for s in segs)


def seg_of(length, amplitude=1.0, start=0):
    samples = amplitude * np.bartlett(length)  # triangle: peak-to-trough == amplitude
    return BeatSegment(samples=samples, start_index=start)


class TestCleanBeats:
    def test_overlong_segment_removed(self):
        segs = [seg_of(100) for _ in range(5)] + [seg_of(161)]
        kept, stats = clean_beats(segs)
        assert stats.removed_length == 1
        assert all(s.samples.size <= 160 for s in kept)

    def test_undersized_segment_removed(self):
        segs = [seg_of(100) for _ in range(5)] + [seg_of(29)]
        _, stats = clean_beats(segs)
        assert stats.removed_length == 1

    def test_identical_segments_no_amplitude_removal(self):
        segs = [seg_of(100) for _ in range(20)]
        kept, stats = clean_beats(segs)
        assert stats.removed_amplitude == 0
        assert len(kept) == 20

    def test_amplitude_outlier_removed(self):
        segs = [seg_of(100, amplitude=1.0, start=i) for i in range(99)]
        segs.append(seg_of(100, amplitude=10.0, start=99))
        amps = np.array([s.samples.max() - s.samples.min() for s in segs])
        # oracle over the constructed amplitudes
        bad = np.abs(amps - amps.mean()) > 2.0 * amps.std()
        assert bad.sum() == 1 and bad[-1]
        kept, stats = clean_beats(segs)
        assert stats.removed_amplitude == 1
        assert all(s.start_index != 99 for s in kept)

    def test_counts_and_fraction(self):
        segs = [seg_of(100) for _ in range(8)] + [seg_of(10), seg_of(200)]
        kept, stats = clean_beats(segs)
        assert stats.total_beats == 10
        assert stats.removed_length == 2
        assert stats.removed_fraction == pytest.approx(
            (stats.removed_length + stats.removed_amplitude) / 10
        )
        assert len(kept) + stats.removed_length + stats.removed_amplitude == 10

    def test_never_increases_and_preserves_order(self):
        rng = np.random.default_rng(15)
        segs = [
            seg_of(int(rng.integers(20, 200)), amplitude=float(rng.uniform(0.5, 2.0)), start=i)
            for i in range(100)
        ]
        kept, _ = clean_beats(segs)
        assert len(kept) <= len(segs)
        starts = [s.start_index for s in kept]
        assert starts == sorted(starts)

    def test_second_pass_with_frozen_stats_removes_nothing(self):
        rng = np.random.default_rng(16)
        segs = [
            seg_of(100, amplitude=float(rng.uniform(0.5, 3.0)), start=i) for i in range(200)
        ]
        amps = np.array([s.samples.max() - s.samples.min() for s in segs])
        mean, std = amps.mean(), amps.std()
        kept, _ = clean_beats(segs)
        kept_amps = np.array([s.samples.max() - s.samples.min() for s in kept])
        assert np.all(kept_amps >= mean - 2 * std)
        assert np.all(kept_amps <= mean + 2 * std)

    def test_empty_errors(self):
        with pytest.raises(DataError, match="no segments"):
            clean_beats([])


class TestToVector:
    def test_padding(self):
        vec = to_vector(seg_of(100))
        assert vec.valid_len == 100
        np.testing.assert_array_equal(vec.values[100:], np.zeros(60))
        np.testing.assert_array_equal(vec.values[:100], seg_of(100).samples)

    def test_full_length_identity(self):
        seg = seg_of(160)
        vec = to_vector(seg)
        assert vec.valid_len == 160
        np.testing.assert_array_equal(vec.values, seg.samples)

    def test_too_long_errors(self):
        with pytest.raises(DataError, match="exceeds"):
            to_vector(seg_of(161))

    def test_round_trip(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(30, 161))
            seg = BeatSegment(samples=rng.normal(size=n), start_index=0)
            vec = to_vector(seg)
            np.testing.assert_array_equal(vec.values[: vec.valid_len], seg.samples)
            np.testing.assert_array_equal(vec.values[vec.valid_len :], np.zeros(160 - n))
