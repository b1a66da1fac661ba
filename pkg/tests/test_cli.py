import json

import numpy as np
import pytest

from ppgbp import synth
from ppgbp.cli import main
from ppgbp.config import PipelineConfig
from ppgbp.dataset import read_beats, read_sidecar
from ppgbp import ann


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, small_record):
    """One prepared record + config + trained model shared by CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    from ppgbp.records import save_record

    record = root / "subject.ppgr"
    save_record(small_record, record, format="binary")

    cfg = PipelineConfig().with_seed(11)
    cfg.train.max_epochs = 80
    config_path = root / "config.json"
    cfg.save(config_path)

    dataset = root / "subject.beats"
    assert main(["--config", str(config_path), "prepare", str(record), "--out", str(dataset)]) == 0
    model = root / "subject.mlp"
    assert main(
        ["--config", str(config_path), "train", "--dataset", str(dataset), "--out", str(model)]
    ) == 0
    return {
        "root": root,
        "record": record,
        "config": config_path,
        "dataset": dataset,
        "model": model,
    }


class TestPrepare:
    def test_outputs_and_envelope(self, workdir):
        side = read_sidecar(workdir["dataset"])
        assert side["n_beats"] >= 100
        assert side["cleaning"]["removed_fraction"] <= 0.072
        beats = read_beats(workdir["dataset"])
        assert len(beats) == side["n_beats"]

    def test_idempotent_rerun(self, workdir, tmp_path):
        out = tmp_path / "again.beats"
        rc = main(
            ["--config", str(workdir["config"]), "prepare", str(workdir["record"]),
             "--out", str(out)]
        )
        assert rc == 0
        assert out.read_bytes() == workdir["dataset"].read_bytes()

    def test_record_without_abp_fails(self, workdir, tmp_path, capsys):
        from ppgbp.records import RawRecord, save_record

        rec = RawRecord(subject_id="noabp", fs=125.0, ppg=np.sin(np.arange(3000) / 10.0))
        p = tmp_path / "noabp.ppgr"
        save_record(rec, p)
        rc = main(["prepare", str(p), "--out", str(tmp_path / "x.beats")])
        assert rc == 3
        assert "labels unavailable" in capsys.readouterr().err

    def test_missing_record_fails(self, tmp_path):
        rc = main(["prepare", str(tmp_path / "ghost.csv"), "--out", str(tmp_path / "x.beats")])
        assert rc == 3


class TestTrain:
    def test_report_written(self, workdir):
        report = json.loads((workdir["root"] / "subject.mlp.train.json").read_text())
        assert report["epochs_run"] >= 1
        assert report["best_epoch"] <= report["epochs_run"]

    def test_seeded_retrain_is_bit_identical(self, workdir, tmp_path):
        out = tmp_path / "again.mlp"
        rc = main(
            ["--config", str(workdir["config"]), "train",
             "--dataset", str(workdir["dataset"]), "--out", str(out)]
        )
        assert rc == 0
        assert out.read_bytes() == workdir["model"].read_bytes()

    def test_empty_dataset_fails(self, tmp_path, capsys):
        from ppgbp.dataset import LabeledBeats, write_beats

        empty = LabeledBeats(
            vectors=np.zeros((0, 160)), labels=np.zeros((0, 3)), valid_len=np.zeros(0)
        )
        p = tmp_path / "empty.beats"
        write_beats(p, empty)
        rc = main(["train", "--dataset", str(p), "--out", str(tmp_path / "m.mlp")])
        assert rc == 3


class TestEvaluate:
    def test_artifacts_parse_back(self, workdir, tmp_path):
        out = tmp_path / "eval"
        rc = main(
            ["--config", str(workdir["config"]), "--out-dir", str(out), "evaluate",
             "--dataset", str(workdir["dataset"]), "--model", str(workdir["model"])]
        )
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["subjects"][0]["subject"] == workdir["record"].stem
        assert (out / "report.csv").read_text().startswith("subject,")
        for name in ("sbp", "dbp"):
            text = (out / f"blandaltman_{name}.csv").read_text()
            assert text.startswith("# bias=")
            assert text.splitlines()[1] == "mean,diff"

    def test_train_split_beats_shuffled_labels(self, workdir, tmp_path):
        out = tmp_path / "eval-train"
        rc = main(
            ["--config", str(workdir["config"]), "--out-dir", str(out), "evaluate",
             "--split", "train",
             "--dataset", str(workdir["dataset"]), "--model", str(workdir["model"])]
        )
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        mae = report["subjects"][0]["sbp"]["mae"]

        # contrast: the same predictions against shuffled labels
        cfg = PipelineConfig.load(workdir["config"])
        beats = read_beats(workdir["dataset"])
        train_set, _ = ann.split_dataset(beats, cfg.train.train_fraction, cfg.train.seed)
        model = ann.load_model(workdir["model"])
        pred = ann.forward(model, train_set.vectors.astype(np.float64))
        rng = np.random.default_rng(0)
        shuffled = rng.permutation(train_set.labels[:, 0].astype(np.float64))
        shuffled_mae = float(np.abs(pred[:, 0] - shuffled).mean())
        assert mae < shuffled_mae

    def test_dimension_mismatch(self, workdir, tmp_path, capsys):
        model = ann.init_model((32, 8, 4, 3), seed=0)
        bad = tmp_path / "narrow.mlp"
        ann.save_model(model, bad)
        rc = main(
            ["evaluate", "--dataset", str(workdir["dataset"]), "--model", str(bad),
             "--split", "all"]
        )
        assert rc == 3
        assert "expects 32 inputs" in capsys.readouterr().err


class TestInfer:
    def test_rows_match_prepare_count(self, workdir, capsys):
        rc = main(
            ["--config", str(workdir["config"]), "infer",
             "--record", str(workdir["record"]), "--model", str(workdir["model"])]
        )
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "beat_start_index,sbp,dbp,map"
        side = read_sidecar(workdir["dataset"])
        # label screening removed nothing here, so counts line up exactly
        assert side["label_outliers_removed"] == 0
        assert len(lines) - 1 == side["n_beats"]

    def test_deterministic_and_file_output(self, workdir, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for path in (a, b):
            rc = main(
                ["--config", str(workdir["config"]), "infer",
                 "--record", str(workdir["record"]), "--model", str(workdir["model"]),
                 "--out", str(path)]
            )
            assert rc == 0
        assert a.read_text() == b.read_text()


class TestProfile:
    def test_profile_outputs(self, workdir, tmp_path):
        out = tmp_path / "prof"
        rc = main(
            ["--out-dir", str(out), "profile", "--model", str(workdir["model"]),
             "--repetitions", "30"]
        )
        assert rc == 0
        obj = json.loads((out / "profile.json").read_text())
        assert obj["avg_power_mw"] == 50.58  # the default operating point
        assert obj["window_samples"] == 375
        assert obj["entire"]["mul_adds"] == sum(s["mul_adds"] for s in obj["stages"])

    def test_flag_overrides(self, workdir, tmp_path):
        out = tmp_path / "prof2"
        rc = main(
            ["--out-dir", str(out), "profile", "--model", str(workdir["model"]),
             "--window-samples", "750", "--power-mw", "40.0", "--scale", "2.0",
             "--repetitions", "30"]
        )
        assert rc == 0
        obj = json.loads((out / "profile.json").read_text())
        assert obj["avg_power_mw"] == 40.0
        assert obj["scale"] == 2.0
        assert obj["window_samples"] == 750


class TestExports:
    def test_export_coeffs(self, tmp_path):
        out = tmp_path / "coeffs.json"
        assert main(["export-coeffs", "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert len(obj["sections"]) == obj["spec"]["order"] == 4
        assert set(obj["sections"][0]) == {"b0", "b1", "b2", "a1", "a2"}

    def test_export_model_json(self, workdir, tmp_path):
        out = tmp_path / "model.json"
        assert main(["export-model-json", "--model", str(workdir["model"]), "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert obj["layer_sizes"] == [160, 35, 20, 3]


class TestUsageAndSeeds:
    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["prepare"])  # missing --out and records
        assert exc.value.code == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_seed_flag_overrides_config(self, workdir, tmp_path):
        out1 = tmp_path / "s1.beats"
        out2 = tmp_path / "s2.beats"
        base = ["--config", str(workdir["config"]), "--seed", "99", "prepare",
                str(workdir["record"])]
        assert main(base + ["--out", str(out1)]) == 0
        assert main(base + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_bad_config_rejected(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"unknown_key": 1}')
        rc = main(["--config", str(p), "export-coeffs"])
        assert rc == 3
