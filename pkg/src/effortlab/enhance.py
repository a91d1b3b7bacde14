"""Intelligibility enhancers: spectral shaping (SS), dynamic range compression
(DRC), their cascade (SSDRC), and equal-power output normalization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal as sig

from .errors import ClippingWarning, EffortLabError, NoActivityError
from .noisemix import active_speech_level
from .signal import Waveform, StftGrid, istft, stft
from .tilt import voicing_probability

SS_FRAME_MS = 32.0  # hop = frame/2 keeps the Hann analysis COLA-exact
GAIN_FLOOR_DB = -30.0
GAIN_CAP_DB = 20.0
CEPSTRAL_LIFTER = 30

DEFAULT_ATTACK_MS = 2.0
DEFAULT_RELEASE_MS = 20.0
# Compressive above -40 dB; identity would be out == in.
DEFAULT_IOEC_KNOTS = ((-60.0, -40.0), (-40.0, -25.0), (-25.0, -17.0), (-10.0, -11.0), (0.0, -9.0))


@dataclass(frozen=True)
class ShaperConfig:
    """Spectral shaping parameters; the pre-emphasis band values are fixed."""

    sharpen_strength: float = 0.3
    hf_boost_max_db: float = 6.0
    preemph_lo_hz: float = 1000.0
    preemph_hi_hz: float = 4000.0
    preemph_gain_db: float = 12.0
    lowcut_hz: float = 500.0
    lowcut_slope_db_per_octave: float = 6.0

    def __post_init__(self):
        if self.sharpen_strength < 0:
            raise EffortLabError("sharpen_strength must be >= 0")
        if self.preemph_lo_hz >= self.preemph_hi_hz:
            raise EffortLabError("pre-emphasis band edges must increase")


@dataclass(frozen=True)
class IoecCurve:
    """Piecewise-linear input/output envelope map in dB; clamps outside knots."""

    knots: tuple

    def __post_init__(self):
        knots = tuple((float(a), float(b)) for a, b in self.knots)
        if len(knots) < 2:
            raise EffortLabError("IOEC needs at least 2 knots")
        xs = [a for a, _ in knots]
        ys = [b for _, b in knots]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise EffortLabError("IOEC input levels must be strictly increasing")
        if any(b < a for a, b in zip(ys, ys[1:])):
            raise EffortLabError("IOEC output levels must be non-decreasing")
        object.__setattr__(self, "knots", knots)

    def __call__(self, level_db):
        xs = np.array([a for a, _ in self.knots])
        ys = np.array([b for _, b in self.knots])
        return np.interp(level_db, xs, ys)

    @classmethod
    def identity(cls, lo: float = -80.0, hi: float = 0.0) -> "IoecCurve":
        return cls(((lo, lo), (hi, hi)))

    @classmethod
    def default(cls) -> "IoecCurve":
        return cls(DEFAULT_IOEC_KNOTS)


def fixed_preemphasis_db(freqs_hz: np.ndarray, cfg: ShaperConfig = ShaperConfig()) -> np.ndarray:
    """Fixed shaping stage: low cut below 500 Hz, plateau boost from 1 kHz up."""
    f = np.maximum(np.asarray(freqs_hz, dtype=float), 1e-3)
    gain = np.zeros_like(f)
    low = f < cfg.lowcut_hz
    gain[low] = -cfg.lowcut_slope_db_per_octave * np.log2(cfg.lowcut_hz / f[low])
    ramp_lo = 0.8 * cfg.preemph_lo_hz
    ramp = (f >= ramp_lo) & (f < cfg.preemph_lo_hz)
    gain[ramp] = cfg.preemph_gain_db * np.log2(f[ramp] / ramp_lo) / np.log2(
        cfg.preemph_lo_hz / ramp_lo
    )
    gain[f >= cfg.preemph_lo_hz] = cfg.preemph_gain_db
    return gain


def _cepstral_envelope(log_mag: np.ndarray, n_fft: int) -> np.ndarray:
    """Smooth log-magnitude envelope by low-quefrency liftering."""
    ceps = np.fft.irfft(log_mag, n=n_fft)
    lifter = np.zeros(n_fft)
    lifter[: CEPSTRAL_LIFTER + 1] = 1.0
    lifter[-CEPSTRAL_LIFTER:] = 1.0
    return np.fft.rfft(ceps * lifter).real


def _wide_smooth(values: np.ndarray, width: int) -> np.ndarray:
    kernel = np.hanning(max(3, width))
    kernel /= kernel.sum()
    return np.convolve(values, kernel, mode="same")


def spectral_shaping(
    w: Waveform, cfg: ShaperConfig = ShaperConfig(), normalize: bool = True
) -> Waveform:
    """Three-stage STFT-domain shaping.

    Stage 1 sharpens spectral peaks and stage 2 boosts high frequencies, both
    scaled by the frame's voicing probability; stage 3 is the fixed
    pre-emphasis. Per-bin gains are floored/capped before synthesis, and the
    output is rescaled to the input's active level unless `normalize=False`.
    """
    if len(w) == 0 or float(np.max(np.abs(w.samples))) == 0.0:
        return Waveform(w.samples.copy(), w.sample_rate)
    if w.sample_rate < 8000:
        raise EffortLabError("spectral shaping expects sample rate >= 8 kHz")
    grid = stft(w, SS_FRAME_MS, SS_FRAME_MS / 2.0, "hann")
    n_fft = grid.frame_length
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / w.sample_rate)
    fixed_db = fixed_preemphasis_db(freqs, cfg)
    nyq = w.sample_rate / 2.0
    hf_ramp = np.clip(
        np.log2(np.maximum(freqs, 1.0) / 1000.0) / np.log2(nyq / 1000.0), 0.0, 1.0
    )
    octave_bins = max(5, int(round(n_fft / 16)))

    frame_len, hop = grid.frame_length, grid.hop
    padded = np.zeros((grid.frames.shape[0] - 1) * hop + frame_len)
    padded[: len(w)] = w.samples

    out_frames = np.empty_like(grid.frames)
    for i, frame in enumerate(grid.frames):
        time_frame = padded[i * hop : i * hop + frame_len]
        if float(np.max(np.abs(time_frame))) == 0.0:
            out_frames[i] = frame
            continue
        p_v = voicing_probability(time_frame, w.sample_rate)
        mag = np.abs(frame)
        gain_db = fixed_db.copy()
        gain_db += cfg.hf_boost_max_db * p_v * hf_ramp
        if cfg.sharpen_strength > 0 and p_v > 0:
            log_mag = np.log(mag + 1e-12)
            env = _cepstral_envelope(log_mag, n_fft)
            smooth_env = _wide_smooth(env, octave_bins)
            sharpen_db = 20.0 / np.log(10.0) * (env - smooth_env)
            gain_db += cfg.sharpen_strength * p_v * sharpen_db
        gain_db = np.clip(gain_db, GAIN_FLOOR_DB, GAIN_CAP_DB)
        out_frames[i] = frame * 10.0 ** (gain_db / 20.0)

    shaped = istft(
        StftGrid(out_frames, grid.frame_length_ms, grid.hop_ms, grid.window_id,
                 grid.sample_rate, grid.n_samples)
    )
    if normalize:
        return equal_power_normalize(shaped, w)
    return shaped


def envelope_db(w: Waveform, attack_ms: float = DEFAULT_ATTACK_MS,
                release_ms: float = DEFAULT_RELEASE_MS) -> np.ndarray:
    """Rectified envelope with asymmetric one-pole smoothing, in dB re full scale."""
    if attack_ms <= 0 or release_ms <= 0:
        raise EffortLabError("attack and release must be positive")
    ga = float(np.exp(-1.0 / (w.sample_rate * attack_ms / 1000.0)))
    gr = float(np.exp(-1.0 / (w.sample_rate * release_ms / 1000.0)))
    rect = np.abs(w.samples)
    env = np.empty_like(rect)
    state = 0.0
    for i, v in enumerate(rect):
        g = ga if v > state else gr
        state = g * state + (1.0 - g) * v
        env[i] = state
    return 20.0 * np.log10(env + 1e-10)


def drc(
    w: Waveform,
    curve: IoecCurve = None,
    attack_ms: float = DEFAULT_ATTACK_MS,
    release_ms: float = DEFAULT_RELEASE_MS,
) -> Waveform:
    """Envelope compression: per-sample gain = IOEC(env_dB) - env_dB."""
    if curve is None:
        curve = IoecCurve.default()
    if len(w) == 0:
        return Waveform(w.samples.copy(), w.sample_rate)
    env = envelope_db(w, attack_ms, release_ms)
    # Clamp to the knot range before differencing so the gain is constant
    # beyond the curve's ends rather than growing without bound.
    clamped = np.clip(env, curve.knots[0][0], curve.knots[-1][0])
    gain_db = curve(clamped) - clamped
    return Waveform(w.samples * 10.0 ** (gain_db / 20.0), w.sample_rate)


def equal_power_normalize(out: Waveform, ref: Waveform) -> Waveform:
    """Scale `out` so its active speech level matches `ref`'s."""
    ref_level = active_speech_level(ref)
    out_level = active_speech_level(out)
    scaled = out.scaled(10.0 ** ((ref_level - out_level) / 20.0))
    peak = float(np.max(np.abs(scaled.samples)))
    if peak > 1.0:
        warnings.warn(ClippingWarning(peak))
    return scaled


def ssdrc(
    w: Waveform,
    cfg: ShaperConfig = ShaperConfig(),
    curve: IoecCurve = None,
    attack_ms: float = DEFAULT_ATTACK_MS,
    release_ms: float = DEFAULT_RELEASE_MS,
) -> Waveform:
    """Spectral shaping followed by DRC, renormalized to the input level."""
    if len(w) == 0 or float(np.max(np.abs(w.samples))) == 0.0:
        return Waveform(w.samples.copy(), w.sample_rate)
    shaped = spectral_shaping(w, cfg)
    compressed = drc(shaped, curve, attack_ms, release_ms)
    return equal_power_normalize(compressed, w)
