"""Vocal-effort measurement: voicing, spectral tilt, normalization, and LTAS."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as sig

from .errors import DegenerateStatsError, NoVoicingError, UndefinedTiltError
from .signal import Waveform, highpass, resample

ANALYSIS_RATE = 16000
ANALYSIS_HIGHPASS_HZ = 70.0
FRAME_MS = 25.0
HOP_MS = 10.0

# Voicing detector: normalized autocorrelation peak searched over pitch lags,
# mapped affinely to a probability; frames more than ENERGY_GATE_DB below the
# utterance peak are treated as silence.
PITCH_MIN_HZ = 50.0
PITCH_MAX_HZ = 400.0
VOICING_PEAK_LO = 0.3
VOICING_PEAK_HI = 0.7
VOICING_LOWPASS_HZ = 1200.0
ENERGY_GATE_DB = 30.0

LTAS_FRAME_MS = 64.0
# Nominal third-octave band centers, 50 Hz .. 8 kHz.
THIRD_OCTAVE_CENTERS = (
    50, 63, 80, 100, 125, 160, 200, 250, 315, 400, 500, 630, 800,
    1000, 1250, 1600, 2000, 2500, 3150, 4000, 5000, 6300, 8000,
)


@dataclass(frozen=True)
class TiltStats:
    """Corpus raw-tilt statistics defining the normalized vocal-effort scale."""

    median: float
    sigma: float
    n_utterances: int = 0

    @property
    def lo(self) -> float:
        return self.median - 3.0 * self.sigma

    @property
    def hi(self) -> float:
        return self.median + 3.0 * self.sigma


@dataclass(frozen=True)
class LtasCurve:
    """Long-term average spectrum on fixed band centers."""

    frequencies_hz: np.ndarray
    levels_db: np.ndarray
    n_samples: int

    def __post_init__(self):
        f = np.asarray(self.frequencies_hz, dtype=float)
        lv = np.asarray(self.levels_db, dtype=float)
        if np.any(np.diff(f) <= 0):
            raise ValueError("band frequencies must be strictly increasing")
        if not np.all(np.isfinite(lv)):
            raise ValueError("band levels must be finite")
        object.__setattr__(self, "frequencies_hz", f)
        object.__setattr__(self, "levels_db", lv)

    def band_mean(self, f_lo: float, f_hi: float) -> float:
        mask = (self.frequencies_hz >= f_lo) & (self.frequencies_hz <= f_hi)
        return float(np.mean(self.levels_db[mask]))


def frame_tilt(frame: np.ndarray) -> float:
    """First-order LPC predictor coefficient: -r(1)/r(0), biased autocorrelation."""
    x = np.asarray(frame, dtype=np.float64)
    r0 = float(np.dot(x, x))
    if r0 <= 0.0:
        raise UndefinedTiltError("zero-energy frame has no defined tilt")
    r1 = float(np.dot(x[:-1], x[1:]))
    return -r1 / r0


def voicing_probability(frame: np.ndarray, sample_rate: int = ANALYSIS_RATE) -> float:
    """Probability of voicing from the normalized autocorrelation pitch peak.

    The peak is taken over the raw frame and a low-passed copy (below the
    pitch-harmonic region) and the larger wins, so periodicity remains
    detectable both on impulsive signals and on signals whose high band has
    been boosted or noise-filled (e.g. enhanced speech).
    """
    x = np.asarray(frame, dtype=np.float64)
    if len(x) < int(round(FRAME_MS / 1000.0 * sample_rate)):
        raise ValueError(f"frame shorter than {FRAME_MS:g} ms at {sample_rate} Hz")
    x = x - np.mean(x)
    lag_min = max(1, int(sample_rate / PITCH_MAX_HZ))
    lag_max = min(len(x) - 1, int(round(sample_rate / PITCH_MIN_HZ)))
    if lag_max <= lag_min or not np.any(x):
        return 0.0
    sos = sig.butter(4, VOICING_LOWPASS_HZ, btype="lowpass", fs=sample_rate, output="sos")
    peak = 0.0
    for cand in (x, sig.sosfiltfilt(sos, x)):
        r0 = float(np.dot(cand, cand))
        if r0 <= 0.0:
            continue
        full = np.correlate(cand, cand, mode="full")[len(cand) - 1 :]
        peak = max(peak, float(np.max(full[lag_min : lag_max + 1])) / r0)
    return float(np.clip((peak - VOICING_PEAK_LO) / (VOICING_PEAK_HI - VOICING_PEAK_LO), 0.0, 1.0))


def _frame_matrix(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    if len(x) < frame:
        return np.zeros((0, frame))
    n_frames = 1 + (len(x) - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def voiced_frame_mask(w: Waveform, assume_voiced: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Analysis frames and the boolean mask of frames used for tilt measurement.

    Tilt frames come from the mean-removed 16 kHz signal; the 70 Hz high-pass
    is applied only to the gating copy, where it suppresses low-frequency
    fluctuations without biasing the autocorrelation ratio of the measured
    frames.
    """
    at_rate = resample(w, ANALYSIS_RATE)
    frame = int(round(FRAME_MS / 1000.0 * ANALYSIS_RATE))
    hop = int(round(HOP_MS / 1000.0 * ANALYSIS_RATE))
    x = at_rate.samples
    frames = _frame_matrix(x - np.mean(x) if len(x) else x, frame, hop)
    if frames.shape[0] == 0:
        return frames, np.zeros(0, dtype=bool)
    gate_frames = _frame_matrix(highpass(at_rate, ANALYSIS_HIGHPASS_HZ).samples, frame, hop)
    rms = np.sqrt(np.mean(gate_frames**2, axis=1))
    peak = float(np.max(rms))
    if peak <= 0.0:
        return frames, np.zeros(frames.shape[0], dtype=bool)
    energetic = rms > peak * 10 ** (-ENERGY_GATE_DB / 20.0)
    if assume_voiced:
        return frames, energetic
    voiced = np.array(
        [
            energetic[i] and voicing_probability(gate_frames[i], ANALYSIS_RATE) > 0.5
            for i in range(frames.shape[0])
        ]
    )
    return frames, voiced


def utterance_tilt(w: Waveform, assume_voiced: bool = False) -> float:
    """Mean frame tilt over voiced frames after 16 kHz / 70 Hz conditioning."""
    frames, mask = voiced_frame_mask(w, assume_voiced=assume_voiced)
    if not np.any(mask):
        raise NoVoicingError("utterance contains no voiced frames")
    return float(np.mean([frame_tilt(f) for f in frames[mask]]))


def fit_normalizer(corpus_tilts: Sequence[float]) -> TiltStats:
    """Median and (mean-centered, n-1) standard deviation of corpus raw tilts."""
    tilts = np.asarray(list(corpus_tilts), dtype=np.float64)
    if len(np.unique(tilts)) < 2:
        raise DegenerateStatsError("need at least 2 distinct tilt values")
    sigma = float(np.std(tilts, ddof=1))
    if sigma <= 0.0:
        raise DegenerateStatsError("corpus tilts have zero spread")
    return TiltStats(median=float(np.median(tilts)), sigma=sigma, n_utterances=len(tilts))


def normalize_tilt(raw: float, stats: TiltStats, clip: bool = True) -> float:
    """Project raw tilt to [-1, 1] via (raw - M) / (3 sigma); positive = flatter."""
    if stats.sigma <= 0.0:
        raise DegenerateStatsError("cannot normalize with zero sigma")
    x = (raw - stats.median) / (3.0 * stats.sigma)
    return float(np.clip(x, -1.0, 1.0)) if clip else float(x)


def denormalize_tilt(x: float, stats: TiltStats) -> float:
    """Inverse projection, linear beyond [-1, 1]: raw = M + x * 3 sigma."""
    if stats.sigma <= 0.0:
        raise DegenerateStatsError("cannot denormalize with zero sigma")
    return stats.median + x * 3.0 * stats.sigma


def average_power_spectrum(
    corpus: Iterable[Waveform],
    target_rate: int = ANALYSIS_RATE,
    frame_ms: float = LTAS_FRAME_MS,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Welch-averaged power spectrum over all frames of all files.

    Returns (frequencies, mean linear power per bin, total samples). Hann
    frames with 50% overlap; each file weighted by its frame count.
    """
    frame = int(round(frame_ms / 1000.0 * target_rate))
    hop = frame // 2
    win = np.hanning(frame)
    acc = np.zeros(frame // 2 + 1)
    n_frames_total = 0
    n_samples_total = 0
    for w in corpus:
        x = resample(w, target_rate).samples
        n_samples_total += len(x)
        if len(x) < frame:
            x = np.pad(x, (0, frame - len(x)))
        n_frames = 1 + (len(x) - frame) // hop
        idx = np.arange(frame)[None, :] + hop * np.arange(n_frames)[:, None]
        spec = np.abs(np.fft.rfft(x[idx] * win, axis=1)) ** 2
        acc += np.sum(spec, axis=0)
        n_frames_total += n_frames
    if n_frames_total == 0:
        raise ValueError("empty corpus")
    freqs = np.fft.rfftfreq(frame, d=1.0 / target_rate)
    return freqs, acc / n_frames_total, n_samples_total


def _third_octave_edges(center: float) -> tuple[float, float]:
    return center / 2 ** (1.0 / 6.0), center * 2 ** (1.0 / 6.0)


def ltas(
    corpus: Iterable[Waveform],
    target_rate: int = ANALYSIS_RATE,
    band_centers: Sequence[float] = THIRD_OCTAVE_CENTERS,
) -> LtasCurve:
    """Long-term average spectrum in dB on third-octave band centers."""
    freqs, power, n_samples = average_power_spectrum(corpus, target_rate=target_rate)
    centers, levels = [], []
    for c in band_centers:
        lo, hi = _third_octave_edges(c)
        if lo >= target_rate / 2.0:
            continue
        mask = (freqs >= lo) & (freqs < min(hi, target_rate / 2.0))
        if not np.any(mask):
            continue
        centers.append(float(c))
        levels.append(10.0 * np.log10(np.mean(power[mask]) + 1e-30))
    return LtasCurve(np.array(centers), np.array(levels), n_samples)


def write_stats(path, stats: TiltStats) -> None:
    """Write corpus stats as a key-value text file."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"median {stats.median:.10g}\n")
        f.write(f"sigma {stats.sigma:.10g}\n")
        f.write(f"lo {stats.lo:.10g}\n")
        f.write(f"hi {stats.hi:.10g}\n")
        f.write(f"n_utterances {stats.n_utterances}\n")


def read_stats(path) -> TiltStats:
    values = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if len(parts) == 2:
                values[parts[0]] = float(parts[1])
    return TiltStats(
        median=values["median"],
        sigma=values["sigma"],
        n_utterances=int(values.get("n_utterances", 0)),
    )
