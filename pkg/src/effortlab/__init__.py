"""Speech intelligibility toolkit: spectral-tilt vocal-effort measurement and
control, SS/SSDRC enhancement, noise-masked stimulus construction, and
listening-test scoring."""

from .effort import EffortTarget, ResponseCurve, apply_effort, response_curve
from .enhance import IoecCurve, ShaperConfig, drc, equal_power_normalize, spectral_shaping, ssdrc
from .noisemix import MixRecipe, active_speech_level, make_ssn, mix_at_snr
from .scoring import Trial, TrialResponse, aggregate, normalize_transcript, qualify, wrr
from .signal import StftGrid, Waveform, highpass, istft, read_wav, resample, stft, write_wav
from .tilt import (
    LtasCurve,
    TiltStats,
    fit_normalizer,
    frame_tilt,
    ltas,
    normalize_tilt,
    utterance_tilt,
    voicing_probability,
)

__version__ = "0.1.0"
