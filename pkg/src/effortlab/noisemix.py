"""Active speech level (ITU-T P.56 style), speech-shaped noise, and SNR mixing."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import signal as sig
from scipy.linalg import solve_toeplitz

from .errors import ClippingWarning, MixError, NoActivityError
from .signal import Waveform
from .tilt import average_power_spectrum, ltas

# Method B-style constants: two-stage exponential envelope smoothing and the
# standard 15.9 dB activity margin.
P56_TIME_CONSTANT_S = 0.03
P56_MARGIN_DB = 15.9
P56_GRID_DB = 0.5

DEFAULT_SSN_LP_ORDER = 20
SSN_MATCH_LO_HZ = 100.0
SSN_MATCH_HI_HZ = 7000.0


@dataclass(frozen=True)
class MixRecipe:
    """SNR and lead/lag geometry for embedding a target in a masker."""

    snr_db: float
    lead_s: float = 0.5
    lag_s: float = 0.5

    def __post_init__(self):
        if self.lead_s < 0 or self.lag_s < 0:
            raise MixError("lead and lag must be non-negative")


@dataclass(frozen=True)
class MixResult:
    mixed: Waveform
    padded_target: Waveform
    scaled_masker: Waveform
    masker_gain: float
    clipped: bool


def speech_envelope(x: np.ndarray, sample_rate: int) -> np.ndarray:
    """Two-stage exponentially smoothed magnitude envelope."""
    g = float(np.exp(-1.0 / (sample_rate * P56_TIME_CONSTANT_S)))
    p = sig.lfilter([1.0 - g], [1.0, -g], np.abs(x))
    return sig.lfilter([1.0 - g], [1.0, -g], p)


def active_speech_level(w: Waveform) -> float:
    """Active speech level in dB re full scale, per the P.56 Method B scheme.

    Thresholds are swept on a half-dB grid and the crossing of the 15.9 dB
    activity margin is interpolated, giving convergence well inside 0.1 dB.
    """
    x = w.samples
    energy = float(np.dot(x, x))
    if len(x) == 0 or energy <= 0.0:
        raise NoActivityError("silent signal has no active speech level")
    q = speech_envelope(x, w.sample_rate)
    q_sorted = np.sort(q)
    peak = q_sorted[-1]
    if peak <= 0.0:
        raise NoActivityError("silent signal has no active speech level")
    top_db = 20.0 * np.log10(peak)
    thresholds_db = np.arange(top_db - 96.0, top_db + P56_GRID_DB, P56_GRID_DB)
    thresholds = 10.0 ** (thresholds_db / 20.0)
    n_active = len(x) - np.searchsorted(q_sorted, thresholds)
    valid = n_active > 0
    thresholds_db, n_active = thresholds_db[valid], n_active[valid]
    active_db = 10.0 * np.log10(energy / n_active)
    margin = active_db - thresholds_db - P56_MARGIN_DB
    # margin decreases with threshold; find its sign change and interpolate.
    below = np.nonzero(margin < 0)[0]
    if len(below) == 0:
        return float(active_db[-1])
    j = below[0]
    if j == 0:
        return float(active_db[0])
    m0, m1 = margin[j - 1], margin[j]
    frac = m0 / (m0 - m1)
    return float(active_db[j - 1] + frac * (active_db[j] - active_db[j - 1]))


def activity_factor(w: Waveform) -> float:
    """Fraction of samples classified active at the converged threshold."""
    level = active_speech_level(w)
    rms_db = 10.0 * np.log10(np.mean(w.samples**2))
    return float(10.0 ** ((rms_db - level) / 10.0))


def make_ssn(
    reference: Iterable[Waveform],
    lp_order: int = DEFAULT_SSN_LP_ORDER,
    seed: int = 0,
    duration_s: float = 10.0,
    sample_rate: int = 16000,
) -> Waveform:
    """Speech-shaped noise: white noise through an LP fit of the corpus LTAS."""
    if lp_order < 2:
        raise ValueError(f"lp_order must be >= 2, got {lp_order}")
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    reference = list(reference)
    freqs, power, _ = average_power_spectrum(reference, target_rate=sample_rate)
    # Autocorrelation of the corpus from its averaged power spectrum.
    r = np.fft.irfft(power)
    a = solve_toeplitz(r[:lp_order], -r[1 : lp_order + 1])
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    noise = sig.lfilter([1.0], np.concatenate(([1.0], a)), rng.standard_normal(n))
    out = Waveform(noise / (np.max(np.abs(noise)) + 1e-12), sample_rate)
    # Single broadband gain aligning the SSN LTAS with the corpus LTAS.
    ref_curve = ltas(reference, target_rate=sample_rate)
    ssn_curve = ltas([out], target_rate=sample_rate)
    common = np.isin(ssn_curve.frequencies_hz, ref_curve.frequencies_hz)
    band = (ssn_curve.frequencies_hz >= SSN_MATCH_LO_HZ) & (
        ssn_curve.frequencies_hz <= SSN_MATCH_HI_HZ
    )
    sel = common & band
    ref_levels = ref_curve.levels_db[np.isin(ref_curve.frequencies_hz, ssn_curve.frequencies_hz[sel])]
    offset_db = float(np.mean(ref_levels - ssn_curve.levels_db[sel]))
    return out.scaled(10.0 ** (offset_db / 20.0))


def mix_at_snr(target: Waveform, masker: Waveform, recipe: MixRecipe) -> MixResult:
    """Embed the target in the masker at the requested SNR with lead/lag.

    SNR is the target's P.56 active level minus the RMS level of the masker
    segment actually used.
    """
    if masker.sample_rate != target.sample_rate:
        raise MixError("target and masker sample rates differ")
    fs = target.sample_rate
    lead = int(round(recipe.lead_s * fs))
    lag = int(round(recipe.lag_s * fs))
    total = len(target) + lead + lag
    if len(masker) < total:
        raise MixError(
            f"masker too short: {len(masker)} samples < target + lead + lag = {total}"
        )
    segment = masker.samples[:total]
    padded = np.concatenate([np.zeros(lead), target.samples, np.zeros(lag)])
    # Level is measured on the padded copy (what actually enters the mix) so
    # a re-measurement of the output reproduces the requested SNR.
    target_level = active_speech_level(Waveform(padded, fs))
    masker_rms_db = 20.0 * np.log10(np.sqrt(np.mean(segment**2)) + 1e-30)
    gain_db = target_level - recipe.snr_db - masker_rms_db
    gain = 10.0 ** (gain_db / 20.0)
    scaled = segment * gain
    mixed = padded + scaled
    clipped = bool(np.max(np.abs(mixed)) > 1.0)
    if clipped:
        warnings.warn(ClippingWarning(float(np.max(np.abs(mixed)))))
    return MixResult(
        mixed=Waveform(mixed, fs),
        padded_target=Waveform(padded, fs),
        scaled_masker=Waveform(scaled, fs),
        masker_gain=gain,
        clipped=clipped,
    )
