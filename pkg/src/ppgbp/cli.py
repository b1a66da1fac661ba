"""Command-line entry point: prepare -> train -> evaluate -> infer -> profile.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import ann, dataset, dsp, metrics, pipeline, profiler, synth
from .config import PipelineConfig
from .errors import DataError, NumericError, PipelineError
from .records import load_record

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.with_seed(args.seed)
    return cfg.validate()


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_prepare(args) -> int:
    cfg = _load_config(args)
    parts = [pipeline.prepare_record(load_record(p), cfg) for p in args.records]
    prep = pipeline.merge_prepared(parts)
    sidecar = {
        "subject_id": prep.subject_id,
        "n_beats": len(prep.beats),
        "cleaning": {
            "total_beats": prep.cleaning.total_beats,
            "removed_length": prep.cleaning.removed_length,
            "removed_amplitude": prep.cleaning.removed_amplitude,
            "removed_fraction": prep.cleaning.removed_fraction,
        },
        "label_stats": {
            "mean_sbp": prep.labels.mean_sbp, "std_sbp": prep.labels.std_sbp,
            "mean_dbp": prep.labels.mean_dbp, "std_dbp": prep.labels.std_dbp,
            "mean_map": prep.labels.mean_map, "std_map": prep.labels.std_map,
        },
        "label_outliers_removed": prep.label_outliers_removed,
    }
    dataset.write_beats(args.out, prep.beats, sidecar=sidecar)
    print(
        f"prepared {len(prep.beats)} beats from {len(args.records)} record(s) "
        f"-> {args.out} (removed fraction {prep.cleaning.removed_fraction:.4f})"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    beats = dataset.read_beats(args.dataset)
    train_set, test_set = ann.split_dataset(
        beats, train_fraction=cfg.train.train_fraction, seed=cfg.train.seed
    )
    model, report = ann.train(train_set, test_set, cfg.train)
    ann.save_model(model, args.out)
    report_path = Path(str(args.out) + ".train.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(
        f"trained on {len(train_set)}/{len(beats)} beats: "
        f"epochs_run={report.epochs_run} best_epoch={report.best_epoch} "
        f"best_val_loss={report.best_val_loss:.6f} -> {args.out}"
    )
    return EXIT_OK


def _select_split(beats, cfg: PipelineConfig, which: str):
    if which == "all":
        return beats
    train_set, test_set = ann.split_dataset(
        beats, train_fraction=cfg.train.train_fraction, seed=cfg.train.seed
    )
    return train_set if which == "train" else test_set


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    model = ann.load_model(args.model)
    beats = _select_split(dataset.read_beats(args.dataset), cfg, args.split)
    if model.n_inputs != beats.vectors.shape[1]:
        raise DataError(
            f"model expects {model.n_inputs} inputs but dataset vectors have "
            f"{beats.vectors.shape[1]}"
        )
    pred = ann.forward(model, beats.vectors.astype(np.float64))
    ref = beats.labels.astype(np.float64)
    report = metrics.evaluate_predictions(pred, ref)
    side = dataset.read_sidecar(args.dataset)
    subject = (side or {}).get("subject_id", Path(args.dataset).stem)

    out = _out_dir(args)
    table, csv_text, json_obj = metrics.render_report([(subject, report)])
    (out / "report.json").write_text(json.dumps(json_obj, indent=2) + "\n")
    (out / "report.csv").write_text(csv_text)
    for i, name in enumerate(("sbp", "dbp")):
        series = metrics.bland_altman(pred[:, i], ref[:, i])
        (out / f"blandaltman_{name}.csv").write_text(metrics.bland_altman_csv(series))
    print(table, end="")
    print(f"wrote report.json, report.csv, blandaltman_{{sbp,dbp}}.csv to {out}")
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    model = ann.load_model(args.model)
    rec = load_record(args.record)
    starts, vectors = pipeline.infer_beats(rec, cfg)
    if model.n_inputs != vectors.shape[1]:
        raise DataError(
            f"model expects {model.n_inputs} inputs but beats have {vectors.shape[1]}"
        )
    preds = ann.forward(model, vectors)
    lines = ["beat_start_index,sbp,dbp,map"]
    lines += [
        f"{s},{p[0]:.3f},{p[1]:.3f},{p[2]:.3f}" for s, p in zip(starts.tolist(), preds)
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(starts)} beat predictions to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = _load_config(args)
    model = ann.load_model(args.model)
    window = synth.generate_window(n_samples=args.window_samples, fs=cfg.filter.fs, seed=cfg.seed)
    energy = profiler.EnergyModel(avg_power_mw=args.power_mw, scale=args.scale)
    report = profiler.build_profile(
        cfg, model, window, energy=energy, repetitions=args.repetitions
    )
    table, json_obj = profiler.render_profile(report)
    out = _out_dir(args)
    (out / "profile.json").write_text(json.dumps(json_obj, indent=2) + "\n")
    print(table, end="")
    print(f"wrote profile.json to {out}")
    return EXIT_OK


def cmd_export_coeffs(args) -> int:
    cfg = _load_config(args)
    cascade = dsp.design_bandpass(cfg.filter)
    obj = {"fs": cascade.fs, "spec": cfg.filter.to_dict(), "sections": cascade.sections()}
    text = json.dumps(obj, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {cascade.n_sections} sections to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_export_model_json(args) -> int:
    model = ann.load_model(args.model)
    text = json.dumps(ann.export_model_json(model), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote model JSON to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppgbp",
        description="per-beat blood-pressure estimation from PPG, with an edge budget profiler",
    )
    parser.add_argument("--config", help="pipeline config JSON", default=None)
    parser.add_argument("--seed", type=int, default=None, help="override every seed")
    parser.add_argument("--out-dir", default=".", help="directory for report artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="records -> labeled beat dataset")
    p.add_argument("records", nargs="+", help="record file(s), CSV or binary")
    p.add_argument("--out", required=True, help="output dataset path")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="dataset -> model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output model path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="dataset + model -> accuracy reports")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument(
        "--split", choices=["all", "train", "test"], default="test",
        help="evaluate on the full set or on the seeded train/test split",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("infer", help="record + model -> per-beat BP rows")
    p.add_argument("--record", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("profile", help="resource/energy budget for one reading")
    p.add_argument("--model", required=True)
    p.add_argument("--window-samples", type=int, default=profiler.DEFAULT_WINDOW_SAMPLES)
    p.add_argument("--power-mw", type=float, default=profiler.DEFAULT_POWER_MW)
    p.add_argument("--scale", type=float, default=1.0, help="host-to-target latency ratio")
    p.add_argument("--repetitions", type=int, default=profiler.DEFAULT_REPETITIONS)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("export-coeffs", help="dump designed filter sections as JSON")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_coeffs)

    p = sub.add_parser("export-model-json", help="dump a model file as JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_model_json)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
