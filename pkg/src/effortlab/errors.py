"""Exception and warning types shared across the toolkit."""


class EffortLabError(Exception):
    """Base class for all toolkit errors."""


class SignalError(EffortLabError):
    """Invalid waveform or transform configuration."""


class ColaError(SignalError):
    """Window/hop pair violates the constant-overlap-add property."""


class UndefinedTiltError(EffortLabError):
    """Spectral tilt requested for a zero-energy frame."""


class NoVoicingError(EffortLabError):
    """Utterance contains no voiced frames."""


class DegenerateStatsError(EffortLabError):
    """Corpus tilt statistics have zero spread."""


class ConvergenceError(EffortLabError):
    """Iterative tilt shaping did not reach the target."""

    def __init__(self, message, best_tilt=None, best_control=None):
        super().__init__(message)
        self.best_tilt = best_tilt
        self.best_control = best_control


class NoActivityError(EffortLabError):
    """Active speech level requested for a silent signal."""


class MixError(EffortLabError):
    """Masker/target geometry makes the requested mix impossible."""


class ScoringError(EffortLabError):
    """Transcript scoring precondition violated."""


class ClippingWarning(UserWarning):
    """Scaling pushed the waveform peak above full scale."""

    def __init__(self, peak):
        super().__init__(f"output peaks at {peak:.4f} above full scale")
        self.peak = peak
