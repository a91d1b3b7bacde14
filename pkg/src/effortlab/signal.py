"""Waveform container, WAV I/O, resampling, filtering, and STFT/ISTFT."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sig
from scipy.io import wavfile

from .errors import ColaError, SignalError

# Resampler quality targets: <=0.1 dB passband ripple, >=60 dB stopband.
RESAMPLE_STOPBAND_DB = 80.0
RESAMPLE_TRANSITION_FRAC = 0.1  # of the output Nyquist

COLA_RTOL = 1e-6

WINDOWS = ("hann", "rect")


@dataclass(frozen=True)
class Waveform:
    """Mono sample sequence with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise SignalError(f"waveform must be mono 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise SignalError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise SignalError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.samples * factor, self.sample_rate)

    def rms(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples**2)))


@dataclass(frozen=True)
class StftGrid:
    """Complex time-frequency matrix plus the analysis metadata needed to invert it."""

    frames: np.ndarray  # (n_frames, fft_size // 2 + 1), complex
    frame_length_ms: float
    hop_ms: float
    window_id: str
    sample_rate: int
    n_samples: int  # original signal length, for trimming on synthesis

    @property
    def frame_length(self) -> int:
        return int(round(self.frame_length_ms * self.sample_rate / 1000.0))

    @property
    def hop(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def read_wav(path) -> Waveform:
    """Read a mono PCM16 or float32 WAV file."""
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise SignalError(f"only mono WAV supported, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise SignalError(f"unsupported WAV sample format {data.dtype}")
    return Waveform(samples, int(rate))


def write_wav(path, w: Waveform, fmt: str = "pcm16") -> None:
    """Write a mono WAV file as PCM 16-bit (default) or IEEE float32."""
    if fmt == "pcm16":
        clipped = np.clip(w.samples, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, w.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    elif fmt == "float32":
        wavfile.write(path, w.sample_rate, w.samples.astype(np.float32))
    else:
        raise SignalError(f"unknown WAV format {fmt!r}")


def _design_resample_filter(up: int, down: int, fs_in: int) -> np.ndarray:
    """Windowed-sinc anti-alias filter for polyphase resampling."""
    fs_up = fs_in * up
    nyq_min = min(fs_in, fs_in * up / down) / 2.0
    width_hz = RESAMPLE_TRANSITION_FRAC * nyq_min
    cutoff_hz = nyq_min - width_hz / 2.0
    numtaps, beta = sig.kaiserord(RESAMPLE_STOPBAND_DB, width_hz / (fs_up / 2.0))
    numtaps = numtaps + 1 if numtaps % 2 == 0 else numtaps
    return sig.firwin(numtaps, cutoff_hz, window=("kaiser", beta), fs=fs_up)


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Resample with a windowed-sinc polyphase anti-alias filter."""
    if target_rate <= 0:
        raise SignalError(f"target_rate must be positive, got {target_rate}")
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), target_rate)
    if len(w) == 0:
        return Waveform(np.zeros(0), target_rate)
    frac = Fraction(target_rate, w.sample_rate)
    up, down = frac.numerator, frac.denominator
    taps = _design_resample_filter(up, down, w.sample_rate)
    out = sig.resample_poly(w.samples, up, down, window=taps)
    return Waveform(out, target_rate)


def highpass(w: Waveform, cutoff: float) -> Waveform:
    """Zero-phase 4th-order Butterworth high-pass with -3 dB at `cutoff`.

    Applied forward-backward, so the per-pass corner is pre-warped to keep the
    overall response at -3 dB at the requested cutoff.
    """
    nyq = w.sample_rate / 2.0
    if not (0 < cutoff < nyq):
        raise SignalError(f"cutoff {cutoff} Hz outside (0, {nyq}) Hz")
    if len(w) == 0:
        return Waveform(np.zeros(0), w.sample_rate)
    # Double pass squares the magnitude: want -1.5 dB per pass at `cutoff`.
    order = 4
    corner = cutoff * (10 ** 0.15 - 1.0) ** (1.0 / (2 * order))
    sos = sig.butter(order, corner, btype="highpass", fs=w.sample_rate, output="sos")
    out = sig.sosfiltfilt(sos, w.samples)
    return Waveform(out, w.sample_rate)


def _window(window_id: str, length: int) -> np.ndarray:
    if window_id == "hann":
        return sig.get_window("hann", length, fftbins=True)
    if window_id == "rect":
        return np.ones(length)
    raise SignalError(f"unknown window {window_id!r}; choose from {WINDOWS}")


def cola_deviation(window_id: str, frame_length: int, hop: int) -> float:
    """Relative deviation of the overlap-added window sum from constant."""
    win = _window(window_id, frame_length)
    n_shifts = 4 * (frame_length // hop + 2)
    total = frame_length + n_shifts * hop
    acc = np.zeros(total)
    for m in range(n_shifts + 1):
        acc[m * hop : m * hop + frame_length] += win
    interior = acc[frame_length : total - frame_length]
    if interior.size == 0 or np.max(interior) == 0:
        return np.inf
    return float((np.max(interior) - np.min(interior)) / np.max(interior))


def is_cola(window_id: str, frame_length: int, hop: int) -> bool:
    return cola_deviation(window_id, frame_length, hop) <= COLA_RTOL


def n_stft_frames(n_samples: int, frame_length: int, hop: int) -> int:
    if n_samples <= frame_length:
        return 1
    return math.ceil((n_samples - frame_length) / hop) + 1


def stft(
    w: Waveform,
    frame_length_ms: float,
    hop_ms: float,
    window_id: str = "hann",
    allow_non_cola: bool = False,
) -> StftGrid:
    """Short-time Fourier transform with zero-padded tail.

    COLA-invalid window/hop pairs are rejected unless `allow_non_cola` is set
    (analysis-only use); `istft` always refuses non-COLA grids.
    """
    frame_length = int(round(frame_length_ms * w.sample_rate / 1000.0))
    hop = int(round(hop_ms * w.sample_rate / 1000.0))
    if frame_length < hop:
        raise SignalError(f"frame length {frame_length} shorter than hop {hop}")
    if hop <= 0:
        raise SignalError("hop must be positive")
    if not allow_non_cola and not is_cola(window_id, frame_length, hop):
        raise ColaError(
            f"window {window_id!r} with frame {frame_length} / hop {hop} violates "
            f"constant overlap-add (deviation "
            f"{cola_deviation(window_id, frame_length, hop):.3g} > {COLA_RTOL:g})"
        )
    win = _window(window_id, frame_length)
    n_frames = n_stft_frames(len(w), frame_length, hop)
    padded = np.zeros((n_frames - 1) * hop + frame_length)
    padded[: len(w)] = w.samples
    idx = np.arange(frame_length)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = np.fft.rfft(padded[idx] * win, axis=1)
    return StftGrid(frames, frame_length_ms, hop_ms, window_id, w.sample_rate, len(w))


def istft(g: StftGrid) -> Waveform:
    """Overlap-add synthesis; exact inverse of `stft` for COLA grids."""
    frame_length, hop = g.frame_length, g.hop
    if g.n_bins != frame_length // 2 + 1:
        raise SignalError(
            f"grid has {g.n_bins} bins, expected {frame_length // 2 + 1} "
            f"for frame length {frame_length}"
        )
    if not is_cola(g.window_id, frame_length, hop):
        raise ColaError(
            f"cannot invert non-COLA grid ({g.window_id!r}, frame {frame_length}, hop {hop})"
        )
    win = _window(g.window_id, frame_length)
    n_frames = g.frames.shape[0]
    total = (n_frames - 1) * hop + frame_length
    out = np.zeros(total)
    wsum = np.zeros(total)
    time_frames = np.fft.irfft(g.frames, n=frame_length, axis=1)
    for m in range(n_frames):
        out[m * hop : m * hop + frame_length] += time_frames[m]
        wsum[m * hop : m * hop + frame_length] += win
    # Suppress edge samples where the window sum is too small to normalize;
    # dividing there would amplify spectral modifications unboundedly.
    good = wsum > 1e-8 * np.max(wsum)
    out[good] /= wsum[good]
    out[~good] = 0.0
    return Waveform(out[: g.n_samples], g.sample_rate)
