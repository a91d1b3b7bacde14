"""Deterministic speech-like test signals for desk-scale experiments.

Not a TTS stand-in: just pulse-excited resonators and noise bursts with
speech-plausible spectra, so tilt, voicing, and envelope machinery can be
exercised without shipping recordings.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sig

from .signal import Waveform

DEFAULT_RATE = 16000

# (center Hz, bandwidth Hz) pairs per pseudo-vowel.
VOWEL_FORMANTS = (
    ((700, 90), (1220, 110), (2600, 160)),
    ((390, 80), (2300, 120), (3000, 180)),
    ((530, 90), (1840, 110), (2480, 170)),
    ((640, 80), (1190, 100), (2390, 160)),
    ((500, 90), (1000, 110), (2240, 170)),
)


def _resonator(fs: int, f0: float, bw: float):
    r = np.exp(-np.pi * bw / fs)
    theta = 2.0 * np.pi * f0 / fs
    return [1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r]


def voiced_segment(
    duration_s: float,
    f0_hz: float,
    fs: int = DEFAULT_RATE,
    glottal_pole: float = 0.93,
    formants=VOWEL_FORMANTS[0],
    aspiration: float = 0.03,
    rng=None,
) -> np.ndarray:
    """Pulse train through a glottal one-pole and formant resonators.

    `aspiration` sets the power ratio of added high-passed noise, which is the
    main knob on the segment's spectral tilt.
    """
    n = int(round(duration_s * fs))
    rng = rng or np.random.default_rng(0)
    # Pulse train with a slow random f0 glide (up to +-12%) so utterance-level
    # spectra do not develop a sharp harmonic comb.
    glide = float(rng.uniform(-0.12, 0.12))
    x = np.zeros(n)
    pos = 0.0
    while pos < n:
        x[int(pos)] = 1.0
        frac = pos / max(n, 1)
        pos += fs / (f0_hz * (1.0 + glide * (2.0 * frac - 1.0)))
    x = sig.lfilter([1.0], [1.0, -glottal_pole], x)
    y = np.zeros(n)
    for f0, bw in formants:
        b, a = _resonator(fs, f0, bw)
        y += sig.lfilter(b, a, x)
    if aspiration > 0:
        sos = sig.butter(2, 2000, btype="highpass", fs=fs, output="sos")
        noise = sig.sosfilt(sos, rng.standard_normal(n))
        noise *= np.sqrt(aspiration * np.mean(y**2) / (np.mean(noise**2) + 1e-30))
        y = y + noise
    return y


def unvoiced_segment(duration_s: float, rng, fs: int = DEFAULT_RATE) -> np.ndarray:
    """High-passed noise burst standing in for a fricative."""
    n = int(round(duration_s * fs))
    noise = rng.standard_normal(n)
    sos = sig.butter(2, 2500, btype="highpass", fs=fs, output="sos")
    return sig.sosfilt(sos, noise)


def _taper(seg: np.ndarray, fs: int, ramp_s: float = 0.015) -> np.ndarray:
    """Raised-cosine onset/offset ramps so segments have syllable-like shape."""
    n_ramp = min(int(round(ramp_s * fs)), len(seg) // 2)
    if n_ramp > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_ramp) / n_ramp))
        seg[:n_ramp] *= ramp
        seg[-n_ramp:] *= ramp[::-1]
    return seg


def make_utterance(seed: int, fs: int = DEFAULT_RATE, duration_s: float = 2.0) -> Waveform:
    """Speech-like utterance: vowel segments, a fricative burst, and pauses.

    Per-segment levels are drawn over a 14 dB range so the utterance has
    syllabic envelope modulation comparable to read speech.
    """
    rng = np.random.default_rng(seed)
    aspiration = float(rng.uniform(0.025, 0.040))
    parts = []
    remaining = duration_s
    while remaining > 0.05:
        kind = rng.choice(["voiced", "voiced", "unvoiced", "pause"])
        seg_dur = min(remaining, float(rng.uniform(0.15, 0.45)))
        level = 10.0 ** (rng.uniform(-14.0, 0.0) / 20.0)
        if kind == "voiced":
            f0 = float(rng.uniform(95.0, 190.0))
            pole = float(rng.uniform(0.920, 0.945))
            base = VOWEL_FORMANTS[rng.integers(len(VOWEL_FORMANTS))]
            formants = tuple(
                (fc * float(rng.uniform(0.85, 1.15)), bw) for fc, bw in base
            )
            seg = voiced_segment(seg_dur, f0, fs, glottal_pole=pole,
                                 formants=formants, aspiration=aspiration, rng=rng)
            seg *= 0.9 * level / (np.max(np.abs(seg)) + 1e-12)
            seg = _taper(seg, fs)
        elif kind == "unvoiced":
            seg = unvoiced_segment(min(seg_dur, 0.2), rng, fs)
            seg *= 0.08 * level / (np.max(np.abs(seg)) + 1e-12)
            seg = _taper(seg, fs)
        else:
            seg = np.zeros(int(round(min(seg_dur, 0.15) * fs)))
        parts.append(seg)
        remaining -= len(seg) / fs
    x = np.concatenate(parts)
    x = x[: int(round(duration_s * fs))]
    if len(x) < int(round(duration_s * fs)):
        x = np.pad(x, (0, int(round(duration_s * fs)) - len(x)))
    x *= 0.5 / (np.max(np.abs(x)) + 1e-12)
    return Waveform(x, fs)


def make_corpus(n: int, base_seed: int = 0, fs: int = DEFAULT_RATE, duration_s: float = 2.0):
    return [make_utterance(base_seed + i, fs=fs, duration_s=duration_s) for i in range(n)]


def ar1_signal(pole: float, n: int, seed: int, fs: int = DEFAULT_RATE) -> Waveform:
    """White-noise-driven first-order all-pole process; r(1)/r(0) = pole."""
    rng = np.random.default_rng(seed)
    x = sig.lfilter([1.0], [1.0, -pole], rng.standard_normal(n))
    x *= 0.3 / (np.max(np.abs(x)) + 1e-12)
    return Waveform(x, fs)


def pulsed_ar1_signal(pole: float, n: int, f0_hz: float = 120.0, fs: int = DEFAULT_RATE) -> Waveform:
    """Pulse-excited one-pole signal: periodic (voiced) with tilt near -pole."""
    period = max(2, int(round(fs / f0_hz)))
    x = np.zeros(n)
    x[::period] = 1.0
    x = sig.lfilter([1.0], [1.0, -pole], x)
    x *= 0.5 / (np.max(np.abs(x)) + 1e-12)
    return Waveform(x, fs)
