"""Compute/memory/energy budget accounting for the deployed pipeline.

Operation counts and memory figures are exact arithmetic over the
configuration (what an embedded port would budget, assuming f32
buffers), host latencies are measured medians, and energy is a
declared model — average power times modeled target latency — with a
configurable host-to-target latency scale.  A published reference
envelope (42.25 ms, 2.137 mJ, 18.2 KB RAM per reading at 50.58 mW
average power) is carried alongside for comparison; the tool never
forces agreement with it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import dsp, segmentation as seg
from .ann import MlpModel, forward
from .config import PipelineConfig
from .errors import DataError

DEFAULT_WINDOW_SAMPLES = 375  # 3 s at 125 Hz
DEFAULT_POWER_MW = 50.58
DEFAULT_REPETITIONS = 30

REF_LATENCY_MS = 42.25
REF_ENERGY_MJ = 2.137
REF_RAM_KB = 18.2

# per-sample costs, documented so the arithmetic is auditable:
# biquad section: 5 multiplies + 4 adds; min/max scan: 2 compares;
# normalization apply: subtract + scale; peak scan: 2 compares.
OPS_PER_BIQUAD_SAMPLE = 9
OPS_MINMAX_SCAN = 2
OPS_NORMALIZE_APPLY = 2
OPS_PEAK_SCAN = 2


@dataclass(frozen=True)
class AnnOpCount:
    mul_adds: int
    activations: int
    param_count: int
    param_bytes: int


@dataclass(frozen=True)
class PreprocOpCount:
    mul_adds: int          # total, filter + scans
    filter_mul_adds: int   # biquad cascade share
    working_bytes: int
    const_bytes: int


@dataclass
class StageCost:
    stage: str  # "preprocessing" | "ann"
    mul_adds: int
    mem_bytes_working: int
    mem_bytes_const: int
    host_latency_s: float


@dataclass
class EnergyModel:
    avg_power_mw: float = DEFAULT_POWER_MW
    scale: float = 1.0  # host-to-target latency ratio

    def validate(self) -> "EnergyModel":
        if self.avg_power_mw <= 0:
            raise DataError(f"average power must be positive, got {self.avg_power_mw}")
        if self.scale <= 0:
            raise DataError(f"latency scale must be positive, got {self.scale}")
        return self


@dataclass
class ProfileReport:
    stages: list[StageCost]
    energy: EnergyModel
    window_samples: int
    modeled_target_latency_ms: float = field(init=False)
    modeled_energy_mj: float = field(init=False)

    def __post_init__(self):
        self.energy.validate()
        total_host_s = sum(s.host_latency_s for s in self.stages)
        self.modeled_target_latency_ms = total_host_s * self.energy.scale * 1e3
        self.modeled_energy_mj = model_energy(self, self.energy)


def count_ann_ops(model: MlpModel) -> AnnOpCount:
    """Multiply-accumulates and f32 parameter bytes for one forward pass."""
    sizes = model.layer_sizes
    mul_adds = sum(a * b for a, b in zip(sizes[:-1], sizes[1:]))
    activations = sum(sizes[1:-1])
    params = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    return AnnOpCount(
        mul_adds=mul_adds,
        activations=activations,
        param_count=params,
        param_bytes=4 * params,
    )


def ann_working_bytes(model: MlpModel) -> int:
    """Peak f32 activation footprint: widest in/out pair live at once."""
    sizes = model.layer_sizes
    return 4 * max(a + b for a, b in zip(sizes[:-1], sizes[1:]))


def count_preproc_ops(
    spec: dsp.FilterSpec,
    window_len: int = DEFAULT_WINDOW_SAMPLES,
    min_distance: int = seg.MIN_PEAK_DISTANCE,
) -> PreprocOpCount:
    """Preprocessing cost for one input window.

    All operation counts are linear in the window length: the biquad
    cascade (9 ops per section per sample), one min/max scan, the
    normalization pass, and the peak scan.  Working memory budgets the
    raw window, one filtered/normalized working copy, filter state,
    the peak index buffer, and the beat vector.
    """
    if window_len < 0:
        raise DataError("window length must be non-negative")
    sections = spec.order  # one biquad per analog prototype order
    filter_ops = OPS_PER_BIQUAD_SAMPLE * sections * window_len
    scan_ops = (OPS_MINMAX_SCAN + OPS_NORMALIZE_APPLY + OPS_PEAK_SCAN) * window_len
    max_peaks = window_len // (min_distance + 1) + 1
    working = (
        4 * window_len          # raw f32 window
        + 4 * window_len        # filtered/normalized working copy
        + 8 * sections          # two f32 state words per section
        + 2 * max_peaks         # u16 peak indices
        + 4 * seg.VECTOR_LEN    # beat vector under assembly
    )
    const = 4 * 5 * sections    # five f32 coefficients per section
    return PreprocOpCount(
        mul_adds=filter_ops + scan_ops,
        filter_mul_adds=filter_ops,
        working_bytes=working,
        const_bytes=const,
    )


@dataclass
class LatencyPipeline:
    """The per-window deployed path, split into its two timed stages."""

    cascade: dsp.BiquadCascade
    model: MlpModel
    config: PipelineConfig

    def preprocess(self, window: np.ndarray) -> np.ndarray:
        dsp.reset_state(self.cascade)
        filtered = dsp.apply_filter(self.cascade, window)
        normalized = dsp.normalize_minmax(filtered)
        peaks = seg.detect_peaks(
            normalized.samples, min_distance=self.config.segmentation.min_distance
        )
        if len(peaks) < 2:
            return np.zeros((0, seg.VECTOR_LEN))
        segments = seg.segment_beats(normalized.samples, peaks)
        good = [
            s for s in segments
            if self.config.segmentation.min_len <= s.samples.size <= self.config.segmentation.max_len
        ]
        if not good:
            return np.zeros((0, seg.VECTOR_LEN))
        return np.stack([seg.to_vector(s).values for s in good])

    def infer(self, vectors: np.ndarray) -> np.ndarray:
        if vectors.shape[0] == 0:
            # keep the stage measurable even for an empty window
            return forward(self.model, np.zeros(self.model.n_inputs))[None, :]
        return np.stack([forward(self.model, v) for v in vectors])


def build_pipeline(config: PipelineConfig, model: MlpModel) -> LatencyPipeline:
    return LatencyPipeline(
        cascade=dsp.design_bandpass(config.filter), model=model, config=config
    )


def measure_latency(
    pipeline: LatencyPipeline, window: np.ndarray, repetitions: int = DEFAULT_REPETITIONS
) -> dict[str, float]:
    """Median per-stage wall time over >= 30 monotonic-clock repetitions."""
    reps = max(int(repetitions), DEFAULT_REPETITIONS)
    window = np.asarray(window, dtype=np.float64)
    vectors = pipeline.preprocess(window)  # warm-up + stage-2 input
    pipeline.infer(vectors)
    pre_times = np.empty(reps)
    ann_times = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        vectors = pipeline.preprocess(window)
        pre_times[i] = time.perf_counter() - t0
    for i in range(reps):
        t0 = time.perf_counter()
        pipeline.infer(vectors)
        ann_times[i] = time.perf_counter() - t0
    return {
        "preprocessing": float(np.median(pre_times)),
        "ann": float(np.median(ann_times)),
    }


def model_energy(report: ProfileReport, energy: EnergyModel) -> float:
    """Modeled energy per reading, mJ: power (mW) x latency (ms) / 1000."""
    energy.validate()
    return energy.avg_power_mw * report.modeled_target_latency_ms / 1e3


def build_profile(
    config: PipelineConfig,
    model: MlpModel,
    window: np.ndarray,
    energy: EnergyModel | None = None,
    repetitions: int = DEFAULT_REPETITIONS,
) -> ProfileReport:
    """Assemble the full per-reading profile for one window."""
    energy = (energy or EnergyModel()).validate()
    window = np.asarray(window, dtype=np.float64)
    pre = count_preproc_ops(
        config.filter, window_len=window.size, min_distance=config.segmentation.min_distance
    )
    annc = count_ann_ops(model)
    latency = measure_latency(build_pipeline(config, model), window, repetitions)
    stages = [
        StageCost(
            stage="preprocessing",
            mul_adds=pre.mul_adds,
            mem_bytes_working=pre.working_bytes,
            mem_bytes_const=pre.const_bytes,
            host_latency_s=latency["preprocessing"],
        ),
        StageCost(
            stage="ann",
            mul_adds=annc.mul_adds,
            mem_bytes_working=ann_working_bytes(model),
            mem_bytes_const=annc.param_bytes,
            host_latency_s=latency["ann"],
        ),
    ]
    return ProfileReport(stages=stages, energy=energy, window_samples=int(window.size))


def _stage_modeled_ms(report: ProfileReport, stage: StageCost) -> float:
    return stage.host_latency_s * report.energy.scale * 1e3


def render_profile(report: ProfileReport) -> tuple[str, dict]:
    """Fixed-width table plus a JSON-ready dict, with reference deltas."""
    rows = []
    for stage in report.stages:
        ms = _stage_modeled_ms(report, stage)
        rows.append(
            {
                "stage": stage.stage,
                "mul_adds": stage.mul_adds,
                "mem_working_bytes": stage.mem_bytes_working,
                "mem_const_bytes": stage.mem_bytes_const,
                "host_latency_ms": stage.host_latency_s * 1e3,
                "modeled_latency_ms": ms,
                "modeled_energy_mj": report.energy.avg_power_mw * ms / 1e3,
            }
        )
    total = {
        "stage": "entire",
        "mul_adds": sum(r["mul_adds"] for r in rows),
        "mem_working_bytes": sum(r["mem_working_bytes"] for r in rows),
        "mem_const_bytes": sum(r["mem_const_bytes"] for r in rows),
        "host_latency_ms": sum(r["host_latency_ms"] for r in rows),
        "modeled_latency_ms": report.modeled_target_latency_ms,
        "modeled_energy_mj": report.modeled_energy_mj,
    }
    ram_kb = total["mem_working_bytes"] / 1024.0
    reference = {
        "latency_ms": REF_LATENCY_MS,
        "energy_mj": REF_ENERGY_MJ,
        "ram_kb": REF_RAM_KB,
        "latency_delta_pct": 100.0 * (total["modeled_latency_ms"] - REF_LATENCY_MS) / REF_LATENCY_MS,
        "energy_delta_pct": 100.0 * (total["modeled_energy_mj"] - REF_ENERGY_MJ) / REF_ENERGY_MJ,
        "ram_delta_pct": 100.0 * (ram_kb - REF_RAM_KB) / REF_RAM_KB,
    }
    json_obj = {
        "window_samples": report.window_samples,
        "avg_power_mw": report.energy.avg_power_mw,
        "scale": report.energy.scale,
        "stages": rows,
        "entire": total,
        "reference_envelope": reference,
    }

    cols = ["stage", "mul_adds", "work KB", "const KB", "host ms", "model ms", "energy mJ"]
    widths = [13, 10, 9, 9, 10, 10, 10]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    for r in rows + [total]:
        cells = [
            r["stage"].rjust(widths[0]),
            f"{r['mul_adds']}".rjust(widths[1]),
            f"{r['mem_working_bytes'] / 1024:.2f}".rjust(widths[2]),
            f"{r['mem_const_bytes'] / 1024:.2f}".rjust(widths[3]),
            f"{r['host_latency_ms']:.3f}".rjust(widths[4]),
            f"{r['modeled_latency_ms']:.3f}".rjust(widths[5]),
            f"{r['modeled_energy_mj']:.4f}".rjust(widths[6]),
        ]
        lines.append("  ".join(cells))
    lines.append(
        f"reference envelope: {REF_LATENCY_MS} ms, {REF_ENERGY_MJ} mJ, {REF_RAM_KB} KB RAM "
        f"(deltas {reference['latency_delta_pct']:+.1f}% / {reference['energy_delta_pct']:+.1f}% "
        f"/ {reference['ram_delta_pct']:+.1f}%)"
    )
    return "\n".join(lines) + "\n", json_obj


def profile_json(report: ProfileReport) -> str:
    return json.dumps(render_profile(report)[1], indent=2) + "\n"
