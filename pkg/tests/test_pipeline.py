import numpy as np
import pytest

from ppgbp import DataError, dsp
from ppgbp.pipeline import infer_beats, merge_prepared, prepare_record
from ppgbp.records import RawRecord
from ppgbp import synth


class TestPrepareRecord:
    def test_basic_shape_and_alignment(self, small_record, default_config):
        prep = prepare_record(small_record, default_config)
        assert prep.beats.vectors.shape[1] == 160
        assert len(prep.beats) == prep.beats.labels.shape[0]
        assert prep.subject_id == small_record.subject_id
        labels = prep.beats.labels.astype(np.float64)
        assert np.all(labels[:, 0] >= labels[:, 1])  # sbp >= dbp
        np.testing.assert_allclose(
            labels[:, 2], (2 * labels[:, 1] + labels[:, 0]) / 3, rtol=1e-5
        )

    def test_requires_abp(self, default_config):
        rec = RawRecord(subject_id="x", fs=125.0, ppg=np.sin(np.arange(2000) / 5.0))
        with pytest.raises(DataError, match="labels unavailable"):
            prepare_record(rec, default_config)

    def test_vectors_are_normalized_beats(self, small_record, default_config):
        prep = prepare_record(small_record, default_config)
        vec = prep.beats.vectors.astype(np.float64)
        valid = prep.beats.valid_len.astype(int)
        assert vec.min() >= 0.0 and vec.max() <= 1.0
        for i in range(min(20, len(prep.beats))):
            np.testing.assert_array_equal(vec[i, valid[i]:], np.zeros(160 - valid[i]))

    def test_infer_matches_prepare_when_no_label_outliers(self, small_record, default_config):
        prep = prepare_record(small_record, default_config)
        starts, vectors = infer_beats(small_record, default_config)
        if prep.label_outliers_removed == 0:
            assert len(starts) == len(prep.beats)
            np.testing.assert_array_equal(
                vectors.astype(np.float32), prep.beats.vectors
            )

    def test_merge_two_records(self, default_config):
        a = prepare_record(synth.generate_subject(n_beats=150, seed=1), default_config)
        b = prepare_record(synth.generate_subject(n_beats=150, seed=2), default_config)
        merged = merge_prepared([a, b])
        assert len(merged.beats) == len(a.beats) + len(b.beats)
        assert merged.cleaning.total_beats == a.cleaning.total_beats + b.cleaning.total_beats
        assert merged.cleaning.removed_fraction == pytest.approx(
            (merged.cleaning.removed_length + merged.cleaning.removed_amplitude)
            / merged.cleaning.total_beats
        )


class TestSynthGenerator:
    def test_deterministic(self):
        a = synth.generate_subject(n_beats=100, seed=5)
        b = synth.generate_subject(n_beats=100, seed=5)
        np.testing.assert_array_equal(a.ppg, b.ppg)
        np.testing.assert_array_equal(a.abp, b.abp)

    def test_seed_changes_signal(self):
        a = synth.generate_subject(n_beats=100, seed=5)
        b = synth.generate_subject(n_beats=100, seed=6)
        assert not np.array_equal(a.ppg, b.ppg)

    def test_abp_in_physiological_range(self, small_record):
        assert small_record.abp.min() > 30
        assert small_record.abp.max() < 200

    def test_one_peak_per_beat(self, small_record, default_config):
        cascade = dsp.design_bandpass(default_config.filter)
        filtered = dsp.apply_filter(cascade, small_record.ppg)
        normalized = dsp.normalize_minmax(filtered)
        from ppgbp.segmentation import detect_peaks

        peaks = detect_peaks(normalized.samples, default_config.segmentation.min_distance)
        assert abs(len(peaks) - 260) <= 2

    def test_window_generator(self):
        w = synth.generate_window(n_samples=375, seed=0)
        assert w.shape == (375,)
        assert np.all(np.isfinite(w))

    def test_cli_writer(self, tmp_path):
        out = tmp_path / "rec.ppgr"
        assert synth.main(["--out", str(out), "--beats", "50", "--seed", "3"]) == 0
        from ppgbp.records import load_record

        rec = load_record(out)
        assert rec.abp is not None
        assert rec.fs == 125.0
