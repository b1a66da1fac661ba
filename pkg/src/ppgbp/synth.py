"""Synthetic single-subject PPG/ABP generator for demos and tests.

Builds a seeded, desk-scale stand-in for a long bedside recording: a
train of Gaussian-shaped pulses (with a small dicrotic bump) whose
amplitude, width, period, and dicrotic ratio wander slowly, riding on
sub-band baseline drift plus a little sensor noise.  The ABP channel
is constructed beat-by-beat so that its per-beat maximum and minimum
are analytic functions of the same morphology parameters:

    sbp_k = 118 + 16*amp_mod - 80*(width_frac - 0.155) + 25*(T0/T - 1)
    dbp_k =  64 + 4*dicrotic_mod + 7*amp_mod - 120*(width_frac - 0.155)
           + 30*(T0/T - 1)

(plus ~0.3 mmHg of jitter), so every label driver is visible in the
pulse shape and a regressor has something real to learn.

The modulations are bounded mixes of two incommensurate sinusoids;
their extremes stay within two standard deviations, so the amplitude
outlier rule only ever trims the filter's start-up transient.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from .records import RawRecord, save_record

BASE_PERIOD_S = 0.82
BASE_WIDTH_FRAC = 0.155
DICROTIC_OFFSET_S = 0.20  # 25 samples at 125 Hz: inside the peak-suppression window


def _two_sine(k: np.ndarray, period_a: float, period_b: float, phase_a: float,
              phase_b: float, w_a: float = 0.7, w_b: float = 0.3) -> np.ndarray:
    """Bounded slow modulation; |result| <= w_a + w_b = 1, std ~ 0.54."""
    return w_a * np.sin(2 * np.pi * k / period_a + phase_a) + w_b * np.sin(
        2 * np.pi * k / period_b + phase_b
    )


@dataclass
class SubjectParams:
    n_beats: int = 5200
    fs: float = 125.0
    seed: int = 0
    noise_std: float = 5e-4
    lead_in_s: float = 1.0


def generate_subject(
    n_beats: int = 5200, fs: float = 125.0, seed: int = 0,
    noise_std: float = 5e-4, lead_in_s: float = 1.0,
) -> RawRecord:
    """Generate one synthetic subject with coupled PPG and ABP streams."""
    rng = np.random.default_rng([seed, 0x50B0])
    k = np.arange(n_beats, dtype=np.float64)

    amp_mod = _two_sine(k, 211.0, 53.0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
    width_mod = _two_sine(k, 173.0, 47.0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
    period_mod = _two_sine(k, 149.0, 61.0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
    dicr_mod = _two_sine(k, 97.0, 41.0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))

    amplitude = 1.0 + 0.25 * amp_mod                 # pulse height, a.u.
    width_frac = BASE_WIDTH_FRAC + 0.02 * width_mod  # pulse sigma / period
    period = BASE_PERIOD_S * (1.0 + 0.10 * period_mod)
    dicrotic = 0.25 + 0.07 * dicr_mod                # bump height / pulse height

    onsets = lead_in_s + np.concatenate(([0.0], np.cumsum(period[:-1])))
    total_s = onsets[-1] + period[-1] + 2.0
    n = int(np.ceil(total_s * fs))
    t = np.arange(n) / fs

    sbp = (
        118.0 + 16.0 * amp_mod - 80.0 * (width_frac - BASE_WIDTH_FRAC)
        + 25.0 * (BASE_PERIOD_S / period - 1.0) + 0.3 * rng.standard_normal(n_beats)
    )
    dbp = (
        64.0 + 4.0 * dicr_mod + 7.0 * amp_mod - 120.0 * (width_frac - BASE_WIDTH_FRAC)
        + 30.0 * (BASE_PERIOD_S / period - 1.0) + 0.3 * rng.standard_normal(n_beats)
    )

    ppg = 2.0 + 0.30 * np.sin(2 * np.pi * 0.07 * t + 0.4) + 0.20 * np.sin(
        2 * np.pi * 0.19 * t + 2.1
    )
    abp = np.zeros(n)

    for i in range(n_beats):
        w = width_frac[i] * period[i]
        center = onsets[i]
        lo = max(0, int((center - 5.0 * w) * fs))
        hi = min(n, int((center + period[i]) * fs) + 1)
        u = (t[lo:hi] - center) / w
        pulse = np.exp(-0.5 * u**2)
        pulse += dicrotic[i] * np.exp(
            -0.5 * ((t[lo:hi] - center - DICROTIC_OFFSET_S) / w) ** 2
        )
        ppg[lo:hi] += amplitude[i] * pulse

        b_lo = int(round(center * fs))
        b_hi = min(n, int(round((center + period[i]) * fs)))
        if b_hi > b_lo:
            phase = (t[b_lo:b_hi] - center) / period[i]
            shape = np.exp(-0.5 * ((phase - 0.30) / 0.11) ** 2)
            shape += 0.22 * np.exp(-0.5 * ((phase - 0.62) / 0.09) ** 2)
            abp[b_lo:b_hi] = dbp[i] + (sbp[i] - dbp[i]) * shape

    # diastolic floor outside the generated beats (lead-in / tail)
    head = int(round(onsets[0] * fs))
    abp[:head] = dbp[0]
    tail = int(round((onsets[-1] + period[-1]) * fs))
    abp[tail:] = dbp[-1]

    ppg += noise_std * rng.standard_normal(n)
    return RawRecord(subject_id=f"synthetic-{seed}", fs=fs, ppg=ppg, abp=abp)


def generate_window(n_samples: int = 375, fs: float = 125.0, seed: int = 0) -> np.ndarray:
    """A short PPG-only window (no labels), e.g. for latency profiling."""
    beats = max(4, int(np.ceil(n_samples / fs / 0.7)) + 2)
    rec = generate_subject(n_beats=beats, fs=fs, seed=seed, lead_in_s=0.3)
    if rec.ppg.size < n_samples:
        raise ValueError(f"generated window shorter than requested ({rec.ppg.size})")
    return rec.ppg[:n_samples]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="write a synthetic PPG/ABP record")
    parser.add_argument("--out", required=True, help="output record path")
    parser.add_argument("--beats", type=int, default=5200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--fs", type=float, default=125.0)
    parser.add_argument("--format", choices=["binary", "csv"], default="binary")
    args = parser.parse_args(argv)
    rec = generate_subject(n_beats=args.beats, fs=args.fs, seed=args.seed)
    save_record(rec, args.out, format=args.format)
    print(f"wrote {args.out}: {rec.ppg.size} samples at {rec.fs:g} Hz, {args.beats} beats")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
