"""Signal-domain vocal-effort control: drive a waveform's spectral tilt to a
normalized target offset while holding active speech level and duration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sig

from .errors import ConvergenceError, DegenerateStatsError, NoVoicingError
from .noisemix import active_speech_level
from .signal import Waveform
from .tilt import TiltStats, denormalize_tilt, frame_tilt, normalize_tilt, voiced_frame_mask

MAX_ITERATIONS = 20
TOLERANCE_NORM = 0.1
CONTROL_LIMIT = 0.999


@dataclass(frozen=True)
class EffortTarget:
    """Normalized tilt offset to add on top of the input's measured tilt."""

    bias: float
    stats: TiltStats

    def __post_init__(self):
        if not np.isfinite(self.bias):
            raise ValueError("bias must be finite")
        if self.stats.sigma <= 0.0:
            raise DegenerateStatsError("effort target needs non-degenerate stats")


@dataclass(frozen=True)
class CurvePoint:
    target_bias: float
    measured_tilt: Optional[float]  # normalized; None when the point failed
    error: Optional[str] = None


@dataclass(frozen=True)
class ResponseCurve:
    points: tuple

    def targets(self) -> np.ndarray:
        return np.array([p.target_bias for p in self.points])

    def measured(self) -> np.ndarray:
        return np.array(
            [p.measured_tilt if p.measured_tilt is not None else np.nan for p in self.points]
        )


def _tilt_filter(x: np.ndarray, u: float) -> np.ndarray:
    """One-knob tilt shaper: zero (brighten) for u >= 0, pole (darken) for u < 0."""
    if u >= 0.0:
        return sig.lfilter([1.0, -u], [1.0], x)
    return sig.lfilter([1.0], [1.0, u], x)


def _masked_tilt(w: Waveform, mask_from: Waveform, assume_voiced: bool) -> float:
    """Utterance tilt of `w` measured on the frames voiced in `mask_from`.

    The shaping filter is time-invariant, so the input's voicing decisions are
    reused for every candidate output; this keeps the closed loop stable.
    """
    frames_ref, mask = voiced_frame_mask(mask_from, assume_voiced=assume_voiced)
    frames, _ = voiced_frame_mask(w, assume_voiced=True)
    n = min(frames.shape[0], len(mask))
    sel = frames[:n][mask[:n]]
    return float(np.mean([frame_tilt(f) for f in sel]))


def apply_effort(
    w: Waveform,
    target: EffortTarget,
    assume_voiced: bool = False,
    max_iterations: int = MAX_ITERATIONS,
    tolerance: float = TOLERANCE_NORM,
) -> Waveform:
    """Shape the waveform so its normalized tilt moves by `target.bias`.

    Bisects the tilt-shaper control against the measured utterance tilt;
    raises ConvergenceError (carrying the best achieved tilt) if the target is
    outside the filter's reach after `max_iterations` steps. The output is
    rescaled to the input's active speech level and keeps its sample count.
    """
    stats = target.stats
    ref_level = active_speech_level(w)
    frames_ref, voiced_mask = voiced_frame_mask(w, assume_voiced=assume_voiced)
    if not np.any(voiced_mask):
        raise NoVoicingError("cannot control effort of an unvoiced signal")

    def measure(u: float) -> tuple[float, Waveform]:
        y = _tilt_filter(w.samples, u)
        out = Waveform(y, w.sample_rate)
        out = out.scaled(10.0 ** ((ref_level - active_speech_level(out)) / 20.0))
        frames, _ = voiced_frame_mask(out, assume_voiced=True)
        n = min(frames.shape[0], len(voiced_mask))
        tilt = float(np.mean([frame_tilt(f) for f in frames[:n][voiced_mask[:n]]]))
        return tilt, out

    raw_in = float(np.mean([frame_tilt(f) for f in frames_ref[voiced_mask]]))
    raw_target = raw_in + target.bias * 3.0 * stats.sigma
    tol_raw = tolerance * 3.0 * stats.sigma

    lo, hi = -CONTROL_LIMIT, CONTROL_LIMIT
    tilt_mid, out_mid = measure(0.0)
    if abs(tilt_mid - raw_target) <= tol_raw:
        return out_mid
    best = (abs(tilt_mid - raw_target), tilt_mid, out_mid, 0.0)
    # Establish the bracketing endpoint on the side of the target.
    if raw_target > tilt_mid:
        lo_u, lo_t = 0.0, tilt_mid
        hi_u = hi
        hi_t, hi_out = measure(hi_u)
        if abs(hi_t - raw_target) < best[0]:
            best = (abs(hi_t - raw_target), hi_t, hi_out, hi_u)
        if abs(hi_t - raw_target) <= tol_raw:
            return hi_out
        if hi_t < raw_target:
            raise ConvergenceError(
                f"target raw tilt {raw_target:.4f} beyond filter reach "
                f"(best {best[1]:.4f})",
                best_tilt=best[1],
                best_control=best[3],
            )
    else:
        hi_u, hi_t = 0.0, tilt_mid
        lo_u = lo
        lo_t, lo_out = measure(lo_u)
        if abs(lo_t - raw_target) < best[0]:
            best = (abs(lo_t - raw_target), lo_t, lo_out, lo_u)
        if abs(lo_t - raw_target) <= tol_raw:
            return lo_out
        if lo_t > raw_target:
            raise ConvergenceError(
                f"target raw tilt {raw_target:.4f} beyond filter reach "
                f"(best {best[1]:.4f})",
                best_tilt=best[1],
                best_control=best[3],
            )
    for _ in range(max_iterations):
        mid_u = 0.5 * (lo_u + hi_u)
        mid_t, mid_out = measure(mid_u)
        if abs(mid_t - raw_target) < best[0]:
            best = (abs(mid_t - raw_target), mid_t, mid_out, mid_u)
        if abs(mid_t - raw_target) <= tol_raw:
            return mid_out
        if mid_t < raw_target:
            lo_u = mid_u
        else:
            hi_u = mid_u
    raise ConvergenceError(
        f"no convergence to raw tilt {raw_target:.4f} in {max_iterations} iterations "
        f"(best {best[1]:.4f})",
        best_tilt=best[1],
        best_control=best[3],
    )


def response_curve(
    w: Waveform,
    targets: Sequence[float],
    stats: TiltStats,
    assume_voiced: bool = False,
) -> ResponseCurve:
    """Sweep bias targets and measure the achieved normalized tilt per point."""
    targets = list(targets)
    if any(b >= a for a, b in zip(targets[1:], targets)):
        raise ValueError("targets must be strictly increasing")
    points = []
    for bias in targets:
        try:
            out = apply_effort(w, EffortTarget(bias, stats), assume_voiced=assume_voiced)
            measured = _masked_tilt(out, w, assume_voiced)
            points.append(CurvePoint(bias, normalize_tilt(measured, stats, clip=False)))
        except ConvergenceError as exc:
            measured = (
                normalize_tilt(exc.best_tilt, stats, clip=False)
                if exc.best_tilt is not None
                else None
            )
            points.append(CurvePoint(bias, measured, error=str(exc)))
    return ResponseCurve(tuple(points))


def write_curve_csv(path, curve: ResponseCurve) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("target_bias,measured_tilt\n")
        for p in curve.points:
            measured = "" if p.measured_tilt is None else f"{p.measured_tilt:.4f}"
            f.write(f"{p.target_bias},{measured}\n")
