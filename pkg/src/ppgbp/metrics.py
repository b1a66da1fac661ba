"""Accuracy metrics, AAMI-style check, and Bland-Altman agreement data."""

from __future__ import annotations

import io
import csv as _csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError

AAMI_RMSD_LIMIT_MMHG = 8.0

OUTPUT_NAMES = ("sbp", "dbp", "map")


@dataclass(frozen=True)
class MetricSet:
    mae: float
    rmsd: float
    me: float
    std_abs_err: float
    pearson_r: float


@dataclass
class EvalReport:
    outputs: dict[str, MetricSet]   # keyed by OUTPUT_NAMES
    n_beats: int
    aami_pass: dict[str, bool]


@dataclass
class BlandAltmanSeries:
    points: np.ndarray  # (n, 2): mean (pred+ref)/2, diff pred-ref
    bias: float
    loa_low: float
    loa_high: float


def _check_paired(pred, ref, minimum=1):
    p = np.asarray(pred, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if p.shape != r.shape or p.ndim != 1:
        raise DataError(f"length mismatch: pred {p.shape} vs ref {r.shape}")
    if p.size < minimum:
        raise DataError(f"need at least {minimum} pairs, got {p.size}")
    return p, r


def compute_metrics(pred, ref, require_correlation: bool = True) -> MetricSet:
    """MAE, RMSD, mean error, std of |error|, and Pearson r.

    Errors are pred - ref.  Standard deviations are population (n).
    Pearson r is undefined for a constant sequence on either side:
    that raises by default, or yields NaN with
    ``require_correlation=False`` when only the error metrics matter.
    """
    p, r = _check_paired(pred, ref)
    d = p - r
    abs_d = np.abs(d)
    sp = p.std()
    sr = r.std()
    if sp == 0 or sr == 0:
        if require_correlation:
            raise DataError("constant sequence: Pearson r undefined")
        pearson = float("nan")
    else:
        pearson = float(np.mean((p - p.mean()) * (r - r.mean())) / (sp * sr))
    return MetricSet(
        mae=float(abs_d.mean()),
        rmsd=float(np.sqrt(np.mean(d * d))),
        me=float(d.mean()),
        std_abs_err=float(abs_d.std()),
        pearson_r=pearson,
    )


def aami_check(metrics: MetricSet) -> bool:
    """Strictly under the 8 mmHg RMSD limit."""
    return metrics.rmsd < AAMI_RMSD_LIMIT_MMHG


def bland_altman(pred, ref) -> BlandAltmanSeries:
    """Agreement series: per-pair (mean, diff), bias, 1.96-std limits."""
    p, r = _check_paired(pred, ref, minimum=2)
    d = p - r
    bias = float(d.mean())
    spread = 1.96 * float(d.std())
    return BlandAltmanSeries(
        points=np.column_stack([(p + r) / 2.0, d]),
        bias=bias,
        loa_low=bias - spread,
        loa_high=bias + spread,
    )


def evaluate_predictions(pred: np.ndarray, ref: np.ndarray) -> EvalReport:
    """Per-output MetricSet + AAMI flags for (n, 3) prediction arrays."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape or pred.ndim != 2 or pred.shape[1] != len(OUTPUT_NAMES):
        raise DataError(f"expected matching (n, 3) arrays, got {pred.shape} vs {ref.shape}")
    outputs = {
        name: compute_metrics(pred[:, i], ref[:, i]) for i, name in enumerate(OUTPUT_NAMES)
    }
    return EvalReport(
        outputs=outputs,
        n_beats=pred.shape[0],
        aami_pass={name: aami_check(ms) for name, ms in outputs.items()},
    )


_CSV_FIELDS = ("mae", "rmsd", "pearson_r")


def _metric_row(report: EvalReport) -> list[float]:
    row = []
    for name in OUTPUT_NAMES:
        ms = report.outputs[name]
        row.extend([ms.mae, ms.rmsd, ms.pearson_r])
    return row


def render_report(reports: list[tuple[str, EvalReport]]) -> tuple[str, str, dict]:
    """Per-subject table plus an unweighted average row.

    Returns (plain-text table, CSV text, JSON-ready dict).  The average
    row is the plain mean of each metric over subjects; its AAMI flag
    applies the limit to the averaged RMSD.
    """
    if not reports:
        raise DataError("no evaluation reports to render")

    def json_metrics(ms: MetricSet, passed: bool) -> dict:
        return {
            "mae": ms.mae, "rmsd": ms.rmsd, "me": ms.me,
            "std_abs_err": ms.std_abs_err, "pearson_r": ms.pearson_r,
            "aami_pass": passed,
        }

    json_obj: dict = {"subjects": []}
    rows = []
    for subject, rep in reports:
        json_obj["subjects"].append(
            {
                "subject": subject,
                "n_beats": rep.n_beats,
                **{
                    name: json_metrics(rep.outputs[name], rep.aami_pass[name])
                    for name in OUTPUT_NAMES
                },
            }
        )
        rows.append([subject] + _metric_row(rep))

    avg = np.mean([_metric_row(rep) for _, rep in reports], axis=0)
    avg_json = {}
    for i, name in enumerate(OUTPUT_NAMES):
        fields = {
            "mae": float(np.mean([r.outputs[name].mae for _, r in reports])),
            "rmsd": float(np.mean([r.outputs[name].rmsd for _, r in reports])),
            "me": float(np.mean([r.outputs[name].me for _, r in reports])),
            "std_abs_err": float(np.mean([r.outputs[name].std_abs_err for _, r in reports])),
            "pearson_r": float(np.mean([r.outputs[name].pearson_r for _, r in reports])),
        }
        fields["aami_pass"] = fields["rmsd"] < AAMI_RMSD_LIMIT_MMHG
        avg_json[name] = fields
    json_obj["average"] = avg_json
    rows.append(["average"] + avg.tolist())

    header = ["subject"]
    for name in OUTPUT_NAMES:
        header.extend(f"{name}_{f}" for f in _CSV_FIELDS)

    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])
    csv_text = buf.getvalue()

    widths = [max(len(header[i]), 10) for i in range(len(header))]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for row in rows:
        cells = [str(row[0]).rjust(widths[0])] + [
            f"{v:10.4f}".rjust(w) for v, w in zip(row[1:], widths[1:])
        ]
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n", csv_text, json_obj


def bland_altman_csv(series: BlandAltmanSeries) -> str:
    """Plot-ready CSV: a comment header carrying bias and the limits of
    agreement, then one mean,diff row per pair."""
    lines = [
        f"# bias={series.bias!r},loa_low={series.loa_low!r},loa_high={series.loa_high!r}",
        "mean,diff",
    ]
    lines.extend(f"{float(m)!r},{float(d)!r}" for m, d in series.points)
    return "\n".join(lines) + "\n"
