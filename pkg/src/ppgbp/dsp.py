"""Bandpass filtering and amplitude normalization for raw PPG.

The noise/drift filter is an inverse-Chebyshev (Chebyshev type II)
bandpass realized as a cascade of second-order sections, designed from
an analog lowpass prototype via the lowpass-to-bandpass transform and
the bilinear transform with frequency pre-warping.  Type II gives a
ripple-free passband and an equiripple stopband floor, which is what a
real-time pulse-wave front end wants: no passband shape distortion,
guaranteed suppression of baseline drift below and motion/noise above
the pulse band.

Section filtering runs through scipy's direct-form transposed-II
cascade (`sosfilt`) with explicit per-section state, so chunked
streaming application is bit-identical to whole-signal application.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import sosfilt

from .errors import DataError, NumericError

# Stopband edges sit one octave beyond each passband edge.
STOP_EDGE_FACTOR = 2.0

# Tiny extra design attenuation so the requested stopband floor holds
# with strict inequality under floating-point roundoff (the type II
# ripple maxima touch the floor exactly in exact arithmetic).
ATTEN_GUARD_DB = 0.01


@dataclass
class FilterSpec:
    """Bandpass design parameters.

    ``order`` is the analog lowpass prototype order; the resulting
    bandpass has ``2*order`` poles, i.e. ``order`` biquad sections.
    ``stopband_atten_db`` is the minimum attenuation beyond the
    stopband edges, which are derived as ``low_cut / 2`` and
    ``2 * high_cut``.
    """

    fs: float = 125.0
    low_cut: float = 0.4
    high_cut: float = 8.0
    order: int = 4
    stopband_atten_db: float = 40.0

    def stop_edges(self) -> tuple[float, float]:
        return self.low_cut / STOP_EDGE_FACTOR, self.high_cut * STOP_EDGE_FACTOR

    def validate(self) -> "FilterSpec":
        if self.fs <= 0:
            raise DataError(f"invalid filter spec: fs={self.fs}")
        if not (0 < self.low_cut < self.high_cut):
            raise DataError(
                f"invalid filter spec: need 0 < low_cut < high_cut, "
                f"got {self.low_cut}..{self.high_cut}"
            )
        if self.stop_edges()[1] >= self.fs / 2:
            raise DataError(
                f"invalid filter spec: upper stopband edge {self.stop_edges()[1]} Hz "
                f"must stay below Nyquist ({self.fs / 2} Hz)"
            )
        if self.order < 2 or self.order % 2:
            raise DataError(f"invalid filter spec: order must be even and >= 2, got {self.order}")
        if self.stopband_atten_db <= 0:
            raise DataError("invalid filter spec: stopband attenuation must be positive")
        return self

    def to_dict(self) -> dict:
        return {
            "fs": self.fs,
            "low_cut": self.low_cut,
            "high_cut": self.high_cut,
            "order": self.order,
            "stopband_atten_db": self.stopband_atten_db,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        return cls(
            fs=float(d.get("fs", 125.0)),
            low_cut=float(d.get("low_cut", 0.4)),
            high_cut=float(d.get("high_cut", 8.0)),
            order=int(d.get("order", 4)),
            stopband_atten_db=float(d.get("stopband_atten_db", 40.0)),
        ).validate()


@dataclass
class BiquadCascade:
    """Second-order sections plus per-section streaming state.

    ``sos`` is (n_sections, 6): [b0 b1 b2 1 a1 a2].  ``state`` is the
    (n_sections, 2) transposed-II delay state; zero state means a
    fresh stream.  Not safe for concurrent use; one cascade per stream.
    """

    sos: np.ndarray
    fs: float
    state: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.sos = np.atleast_2d(np.asarray(self.sos, dtype=np.float64))
        if self.state is None:
            self.state = np.zeros((self.sos.shape[0], 2), dtype=np.float64)

    @property
    def n_sections(self) -> int:
        return self.sos.shape[0]

    def sections(self) -> list[dict]:
        """Coefficient dump, one dict per section (for export/verification)."""
        return [
            {"b0": s[0], "b1": s[1], "b2": s[2], "a1": s[4], "a2": s[5]}
            for s in self.sos.tolist()
        ]

    def poles(self) -> np.ndarray:
        """Poles of every section (roots of z^2 + a1 z + a2)."""
        return np.concatenate([np.roots([1.0, s[4], s[5]]) for s in self.sos])


def _cheb2_lowpass_prototype(order: int, rs_db: float):
    """Analog type II lowpass prototype, unit stopband edge.

    Returns (zeros, poles, gain) with attenuation exactly ``rs_db`` at
    w = 1 and a flat (ripple-free) passband.  Zeros sit on the
    imaginary axis at the stopband ripple nulls; poles are the
    reciprocals of the corresponding type I pole positions.
    """
    de = 1.0 / math.sqrt(10.0 ** (0.1 * rs_db) - 1.0)
    mu = math.asinh(1.0 / de) / order
    m = np.arange(-order + 1, order, 2)  # even order: no zero angle
    z = -np.conjugate(1j / np.sin(m * np.pi / (2.0 * order)))
    p = -np.exp(1j * np.pi * m / (2.0 * order))
    p = math.sinh(mu) * p.real + 1j * math.cosh(mu) * p.imag
    p = 1.0 / p
    k = (np.prod(-p) / np.prod(-z)).real
    return z, p, k


def _lowpass_to_bandpass(z, p, k, w0: float, bw: float):
    """Analog lowpass (edge 1 rad/s) -> bandpass centered at w0, width bw."""
    degree = len(p) - len(z)
    z_s = z * bw / 2.0
    p_s = p * bw / 2.0
    z_bp = np.concatenate([z_s + np.sqrt(z_s**2 - w0**2 + 0j), z_s - np.sqrt(z_s**2 - w0**2 + 0j)])
    p_bp = np.concatenate([p_s + np.sqrt(p_s**2 - w0**2 + 0j), p_s - np.sqrt(p_s**2 - w0**2 + 0j)])
    z_bp = np.append(z_bp, np.zeros(degree))
    return z_bp, p_bp, k * bw**degree


def _bilinear(z, p, k, fs: float):
    """Map analog zpk to digital via the bilinear transform."""
    fs2 = 2.0 * fs
    degree = len(p) - len(z)
    z_d = (fs2 + z) / (fs2 - z)
    p_d = (fs2 + p) / (fs2 - p)
    z_d = np.append(z_d, -np.ones(degree))
    k_d = k * (np.prod(fs2 - z) / np.prod(fs2 - p)).real
    return z_d, p_d, k_d


def _conjugate_pairs(roots: np.ndarray):
    """Split a conjugate-symmetric root set into quadratic building blocks.

    Returns (complex_reps, real_pairs): one upper-half-plane
    representative per conjugate pair, plus real roots coupled two at
    a time in sorted order (even-order type II designs produce none,
    but the transform can).  Raises on an unpairable set.
    """
    tol = 1e-8
    scale = max(1.0, float(np.abs(roots).max())) if len(roots) else 1.0
    complex_roots = [r for r in roots if abs(r.imag) > tol * scale]
    real_roots = sorted(r.real for r in roots if abs(r.imag) <= tol * scale)
    upper = sorted((r for r in complex_roots if r.imag > 0), key=lambda r: (r.real, r.imag))
    lower = sorted((r for r in complex_roots if r.imag < 0), key=lambda r: (r.real, -r.imag))
    if len(upper) != len(lower) or len(real_roots) % 2:
        raise NumericError("filter design produced an unpairable root set")
    for u, l in zip(upper, lower):
        if abs(u - l.conjugate()) > 1e-6 * scale:
            raise NumericError("filter design produced non-conjugate complex roots")
    reps = list(upper)
    # real roots pair up in sorted order; mark with zero imaginary part
    pairs = [(real_roots[i], real_roots[i + 1]) for i in range(0, len(real_roots), 2)]
    return reps, pairs


def _quad_from_pair(rep) -> np.ndarray:
    if isinstance(rep, tuple):  # two real roots
        r1, r2 = rep
        return np.array([1.0, -(r1 + r2), r1 * r2])
    return np.array([1.0, -2.0 * rep.real, abs(rep) ** 2])


def _pair_sections(z: np.ndarray, p: np.ndarray, k: float) -> np.ndarray:
    """Group conjugate zero/pole pairs into second-order sections.

    Highest-Q pole pairs are matched with the zero pair nearest in
    angle, which keeps per-section peak gain moderate.  Overall gain is
    spread evenly across sections (sign folded into the first).
    """
    z_reps, z_real = _conjugate_pairs(z)
    p_reps, p_real = _conjugate_pairs(p)
    z_pairs = z_reps + z_real
    p_pairs = p_reps + p_real
    if len(z_pairs) != len(p_pairs):
        raise NumericError("zero/pole pair count mismatch")

    def pair_angle(rep) -> float:
        if isinstance(rep, tuple):
            return 0.0 if rep[0] >= 0 else math.pi
        return abs(cmath.phase(rep))

    def pair_radius(rep) -> float:
        if isinstance(rep, tuple):
            return max(abs(rep[0]), abs(rep[1]))
        return abs(rep)

    order = sorted(range(len(p_pairs)), key=lambda i: -pair_radius(p_pairs[i]))
    remaining = list(range(len(z_pairs)))
    n_sec = len(p_pairs)
    gain = abs(k) ** (1.0 / n_sec)
    sign = math.copysign(1.0, k)
    sos = np.zeros((n_sec, 6))
    for row, pi in enumerate(order):
        zi = min(remaining, key=lambda j: abs(pair_angle(z_pairs[j]) - pair_angle(p_pairs[pi])))
        remaining.remove(zi)
        b = gain * _quad_from_pair(z_pairs[zi])
        if row == 0:
            b = sign * b
        a = _quad_from_pair(p_pairs[pi])
        sos[row, :3] = b
        sos[row, 3:] = a
    return sos


def design_bandpass(spec: FilterSpec) -> BiquadCascade:
    """Design the type II bandpass cascade for ``spec``.

    The stopband edges (one octave beyond each passband edge) receive
    at least ``stopband_atten_db`` of attenuation; the passband is
    monotone with its -3 dB points falling near the spec's cut
    frequencies.  Raises NumericError if any designed pole lands on or
    outside the unit circle.
    """
    spec.validate()
    f_lo, f_hi = spec.stop_edges()
    # pre-warp stopband edges so the digital response hits them exactly
    w1 = 2.0 * spec.fs * math.tan(math.pi * f_lo / spec.fs)
    w2 = 2.0 * spec.fs * math.tan(math.pi * f_hi / spec.fs)
    z, p, k = _cheb2_lowpass_prototype(spec.order, spec.stopband_atten_db + ATTEN_GUARD_DB)
    z, p, k = _lowpass_to_bandpass(z, p, k, w0=math.sqrt(w1 * w2), bw=w2 - w1)
    z, p, k = _bilinear(z, p, k, spec.fs)
    if np.any(np.abs(p) >= 1.0):
        raise NumericError(
            f"designed pole outside unit circle (max |p| = {np.abs(p).max():.6f})"
        )
    cascade = BiquadCascade(sos=_pair_sections(z, p, k), fs=spec.fs)
    if not is_stable(cascade):
        raise NumericError("paired sections are unstable")
    return cascade


def is_stable(cascade: BiquadCascade) -> bool:
    return bool(np.all(np.abs(cascade.poles()) < 1.0))


def frequency_response(cascade: BiquadCascade, freqs_hz) -> np.ndarray:
    """Complex response H(e^{j 2 pi f / fs}) evaluated per section."""
    f = np.asarray(freqs_hz, dtype=np.float64)
    zinv = np.exp(-2j * np.pi * f / cascade.fs)
    h = np.ones_like(zinv)
    for b0, b1, b2, _, a1, a2 in cascade.sos:
        h *= (b0 + b1 * zinv + b2 * zinv**2) / (1.0 + a1 * zinv + a2 * zinv**2)
    return h


def apply_filter(cascade: BiquadCascade, signal) -> np.ndarray:
    """Run samples through the cascade, advancing its streaming state.

    Output length equals input length.  Call :func:`reset_state` (or
    use a fresh cascade) to start a new stream; feeding a signal in
    chunks without resets is exactly equivalent to one whole-signal
    call.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DataError(f"expected 1-D signal, got shape {x.shape}")
    if x.size == 0:
        return x.copy()
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite sample in filter input")
    y, zf = sosfilt(cascade.sos, x, zi=cascade.state)
    cascade.state = zf
    return y


def reset_state(cascade: BiquadCascade) -> BiquadCascade:
    """Zero the streaming state so the next sample starts a fresh stream."""
    cascade.state = np.zeros((cascade.n_sections, 2), dtype=np.float64)
    return cascade


@dataclass
class NormalizedSignal:
    """Min-max normalized samples with the original amplitude bounds."""

    samples: np.ndarray
    source_min: float
    source_max: float


def normalize_minmax(signal) -> NormalizedSignal:
    """Scale the whole sequence to [0, 1]: (x - min) / (max - min)."""
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise DataError("cannot normalize an empty signal")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite sample in normalization input")
    lo = float(x.min())
    hi = float(x.max())
    if hi == lo:
        raise DataError("constant signal: min == max, normalization undefined")
    return NormalizedSignal(samples=(x - lo) / (hi - lo), source_min=lo, source_max=hi)
